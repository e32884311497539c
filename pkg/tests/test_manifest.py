import hashlib
import json
import os

from geofeedkit.manifest import MANIFEST_NAME, RunManifest


def test_manifest_of_a_directory(tmp_path):
    (tmp_path / "sub").mkdir()
    (tmp_path / "a.csv").write_bytes(b"a")
    (tmp_path / "sub" / "b.csv").write_bytes(b"b")
    (tmp_path / MANIFEST_NAME).write_text("{}", encoding="utf-8")

    manifest = RunManifest("fetch", inputs=["locators.txt"], config={"timeout": 10})
    manifest.add_output(str(tmp_path))
    path = manifest.write(str(tmp_path))

    assert path == os.path.join(str(tmp_path), MANIFEST_NAME)
    with open(path, encoding="utf-8") as fp:
        obj = json.load(fp)

    assert obj["command"] == "fetch"
    assert obj["inputs"] == ["locators.txt"]
    assert obj["config"] == {"timeout": 10}
    assert obj["finished"]
    assert obj["outputs"] == {
        os.path.normpath(str(tmp_path / "a.csv")): hashlib.sha256(b"a").hexdigest(),
        os.path.normpath(str(tmp_path / "sub" / "b.csv")): hashlib.sha256(b"b").hexdigest(),
    }


def test_manifest_of_a_file(tmp_path):
    output = tmp_path / "bundle.json"
    output.write_text("{}\n", encoding="utf-8")

    manifest = RunManifest("sign")
    manifest.add_output(str(output))
    path = manifest.write_for(str(output))

    assert path == str(tmp_path / "bundle.manifest.json")
    with open(path, encoding="utf-8") as fp:
        assert list(json.load(fp)["outputs"]) == [os.path.normpath(str(output))]
