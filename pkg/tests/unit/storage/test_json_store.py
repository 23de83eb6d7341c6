"""Tests for odskit.storage.json_store module."""

import json
import logging

import pytest

from odskit import __version__
from odskit.storage import json_store


class TestSaveDocument:
    """Tests for save_document function."""

    def test_writes_header_first(self, tmp_path):
        path = tmp_path / "doc.json"
        json_store.save_document(str(path), "model", {"layer_sizes": [4, 2]})
        data = json.loads(path.read_text())
        assert list(data)[:3] == ["format_version", "kind", "odskit_version"]
        assert data["odskit_version"] == __version__
        assert data["layer_sizes"] == [4, 2]

    def test_payload_cannot_override_header(self, tmp_path):
        path = tmp_path / "doc.json"
        json_store.save_document(str(path), "model", {"kind": "dataset", "x": 1})
        assert json.loads(path.read_text())["kind"] == "model"

    def test_creates_parent_directories(self, tmp_path):
        path = tmp_path / "a" / "b" / "doc.json"
        json_store.save_document(str(path), "model", {})
        assert path.exists()

    def test_compacts_numeric_lists(self, tmp_path):
        path = tmp_path / "doc.json"
        json_store.save_document(str(path), "model", {"values": [1.5, -2, 3e-07]})
        assert '"values": [1.5, -2, 3e-07]' in path.read_text()

    def test_compacts_string_lists(self, tmp_path):
        path = tmp_path / "doc.json"
        json_store.save_document(str(path), "dataset", {"names": ["a", "b"]})
        assert '"names": ["a", "b"]' in path.read_text()

    def test_floats_reload_exactly(self, tmp_path):
        path = tmp_path / "doc.json"
        values = [0.1 + 0.2, 1.0 / 3.0, 2.5e-300, -123456.789]
        json_store.save_document(str(path), "model", {"values": values})
        assert json_store.load_document(str(path), "model")["values"] == values

    def test_rejects_nan(self, tmp_path):
        with pytest.raises(ValueError):
            json_store.save_document(str(tmp_path / "doc.json"), "model", {"x": float("nan")})

    def test_logs_debug(self, tmp_path, caplog):
        caplog.set_level(logging.DEBUG)
        json_store.save_document(str(tmp_path / "doc.json"), "model", {})
        assert "Saved model document" in caplog.text


class TestLoadDocument:
    """Tests for load_document function."""

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "doc.json"
        path.write_text("{not json")
        with pytest.raises(json_store.DocumentFormatError, match="Malformed"):
            json_store.load_document(str(path), "model")

    def test_missing_header(self, tmp_path):
        path = tmp_path / "doc.json"
        path.write_text(json.dumps({"kind": "model"}))
        with pytest.raises(json_store.DocumentFormatError, match="not an odskit document"):
            json_store.load_document(str(path), "model")

    def test_newer_version(self, tmp_path):
        path = tmp_path / "doc.json"
        path.write_text(json.dumps({"format_version": json_store.FORMAT_VERSION + 1, "kind": "model"}))
        with pytest.raises(json_store.DocumentVersionError):
            json_store.load_document(str(path), "model")

    def test_non_integer_version(self, tmp_path):
        path = tmp_path / "doc.json"
        path.write_text(json.dumps({"format_version": "1", "kind": "model"}))
        with pytest.raises(json_store.DocumentFormatError, match="non-integer"):
            json_store.load_document(str(path), "model")

    def test_wrong_kind(self, tmp_path):
        path = tmp_path / "doc.json"
        json_store.save_document(str(path), "dataset", {})
        with pytest.raises(json_store.DocumentFormatError, match="expected 'model'"):
            json_store.load_document(str(path), "model")

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            json_store.load_document(str(tmp_path / "missing.json"), "model")
