"""
Run manifests.

Every command writes a ``manifest.json`` next to its outputs recording what
was run, with which inputs and settings, and the SHA-256 digest of every
output file.
"""

import datetime
import hashlib
import json
import os

from dataclasses import dataclass, field

from . import __version__

MANIFEST_NAME = "manifest.json"


def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fp:
        for chunk in iter(lambda: fp.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _now():
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    command: str
    inputs: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    version: str = __version__
    started: str = field(default_factory=_now)
    finished: str = None
    outputs: dict = field(default_factory=dict)

    def add_output(self, path):
        """
        Records the digest of an output file or of every file below an
        output directory.
        """
        if os.path.isdir(path):
            for root, _, files in os.walk(path):
                for name in sorted(files):
                    if name != MANIFEST_NAME:
                        self.add_output(os.path.join(root, name))
            return
        self.outputs[os.path.normpath(path)] = file_digest(path)

    def finish(self):
        self.finished = _now()

    def to_dict(self):
        return {
            "command": self.command,
            "inputs": [str(i) for i in self.inputs],
            "config": self.config,
            "version": self.version,
            "started": self.started,
            "finished": self.finished,
            "outputs": dict(sorted(self.outputs.items())),
        }

    def write(self, directory):
        """
        Finishes the manifest and writes it to ``directory``.

        :return: the path of the manifest
        :rtype: str
        """
        if self.finished is None:
            self.finish()
        return self._dump(os.path.join(directory or ".", MANIFEST_NAME))

    def write_for(self, output):
        """
        Writes the manifest of a single-file output next to it, ``bundle.json``
        gets ``bundle.manifest.json``.

        :return: the path of the manifest
        :rtype: str
        """
        if self.finished is None:
            self.finish()
        return self._dump(os.path.splitext(output)[0] + ".manifest.json")

    def _dump(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fp:
            json.dump(self.to_dict(), fp, indent=2, sort_keys=True, default=str)
            fp.write("\n")
        return path
