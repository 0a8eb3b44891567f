"""Run manifests: every CLI command records its resolved configuration,
input digests, and outputs next to the artifacts it writes, so any run can
be reproduced (byte-identically with a single thread) via ``rerun``."""

from __future__ import annotations

import datetime
import hashlib
import io
import json
from dataclasses import asdict, dataclass, field

TOOL_NAME = "mvembed"
MANIFEST_NAME = "manifest.json"


def sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with io.open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    command: str
    args: dict
    inputs: dict = field(default_factory=dict)    # path -> sha256
    outputs: list = field(default_factory=list)
    tool: str = TOOL_NAME
    version: str = "0.1.0"
    created: str = ""

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        return cls(**json.loads(text))

    def write(self, path: str) -> None:
        with io.open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @classmethod
    def read(cls, path: str) -> "RunManifest":
        with io.open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def build_manifest(command: str, args: dict, input_paths: list[str],
                   outputs: list[str]) -> RunManifest:
    from . import __version__
    return RunManifest(
        command=command,
        args=dict(sorted(args.items())),
        inputs={p: sha256_file(p) for p in input_paths},
        outputs=sorted(outputs),
        version=__version__,
        created=datetime.datetime.now(datetime.timezone.utc)
        .strftime("%Y-%m-%dT%H:%M:%SZ"),
    )
