import json

import numpy as np
import pytest

from echosim.assets import (
    MANIFEST_NAME,
    DecodeError,
    MissingAsset,
    SchemaError,
    build_assets,
    default_planes,
    key_name,
    load_manifest,
    parse_key,
    synthetic_library,
    synthetic_sequence,
)
from echosim.gifcodec import GifAnimation
from echosim.session import TiltClass, View
from echosim.slicer import make_plane


@pytest.fixture(scope="module")
def library(tmp_path_factory):
    out = tmp_path_factory.mktemp("assets")
    return out, synthetic_library(out, nt=4, n=16, size_px=24)


def test_key_names_round_trip():
    for view in View:
        for cls in TiltClass:
            key = (view, cls)
            assert parse_key(key_name(key)) == key
    assert key_name((View.APICAL, TiltClass.TILT_VIEW)) == "Apical/TiltView"
    for bad in ("Apical", "Apical/Nope", "Nope/TiltView", "a/b/c"):
        with pytest.raises(SchemaError):
            parse_key(bad)


def test_synthetic_library_shape(library):
    out, manifest = library
    assert len(manifest.entries) == 10  # five views, Normal + Tilt
    for view in View:
        assert (view, TiltClass.NORMAL_VIEW) in manifest.entries
        assert (view, TiltClass.TILT_VIEW) in manifest.entries
        assert view in manifest.planes
        assert view in manifest.sensors
    assert (out / MANIFEST_NAME).is_file()
    assert sorted(p.name for p in out.glob("*.gif"))[0] == "Apical_NormalView.gif"


def test_load_round_trip(library):
    out, manifest = library
    again = load_manifest(out / MANIFEST_NAME)
    assert again == manifest
    assert set(again.animations) == set(manifest.entries)
    for anim in again.animations.values():
        assert isinstance(anim, GifAnimation)
        assert anim.nt == 4


def test_rebuild_is_byte_identical(tmp_path):
    vols = {
        (View.APICAL, TiltClass.NORMAL_VIEW): synthetic_sequence(nt=3, n=12),
        (View.APICAL, TiltClass.TILT_VIEW): synthetic_sequence(nt=3, n=12, accent=1.0),
    }
    planes = default_planes(vols[(View.APICAL, TiltClass.NORMAL_VIEW)].frames[0],
                            size_px=16)
    a, b = tmp_path / "a", tmp_path / "b"
    build_assets(vols, planes, a)
    build_assets(vols, planes, b)
    for name in sorted(p.name for p in a.iterdir()):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_fallback_chain(tmp_path):
    vols = {(View.PLAX, TiltClass.NORMAL_VIEW): synthetic_sequence(nt=2, n=12)}
    planes = default_planes(vols[(View.PLAX, TiltClass.NORMAL_VIEW)].frames[0], 16)
    manifest = build_assets(vols, planes, tmp_path)
    # every class falls back to the only asset present
    for cls in TiltClass:
        assert manifest.resolve(View.PLAX, cls) == (View.PLAX, TiltClass.NORMAL_VIEW)
    with pytest.raises(MissingAsset) as exc:
        manifest.resolve(View.PSAX, TiltClass.NORMAL_VIEW)
    assert "PSAX" in str(exc.value)


def test_fallback_prefers_exact_then_nearest(library):
    _, manifest = library
    # exact key wins when present
    assert manifest.resolve(View.APICAL, TiltClass.TILT_VIEW) == \
        (View.APICAL, TiltClass.TILT_VIEW)
    # the library has no Undershot render; it borrows the Normal one
    assert manifest.resolve(View.APICAL, TiltClass.UNDERSHOT) == \
        (View.APICAL, TiltClass.NORMAL_VIEW)
    # Overshot borrows the Tilt render first
    assert manifest.resolve(View.APICAL, TiltClass.OVERSHOT) == \
        (View.APICAL, TiltClass.TILT_VIEW)


def test_lookup_needs_no_files_after_load(tmp_path):
    synthetic_library(tmp_path, nt=2, n=12, size_px=16)
    manifest = load_manifest(tmp_path / MANIFEST_NAME)
    for p in tmp_path.glob("*.gif"):
        p.unlink()
    anim = manifest.lookup(View.APICAL, TiltClass.TILT_VIEW)
    assert anim.nt == 2


def test_missing_gif_named_in_error(tmp_path):
    synthetic_library(tmp_path, nt=2, n=12, size_px=16)
    (tmp_path / "PSAX_TiltView.gif").unlink()
    with pytest.raises(MissingAsset) as exc:
        load_manifest(tmp_path / MANIFEST_NAME)
    assert "PSAX/TiltView" in str(exc.value)


def test_corrupt_gif_is_decode_error(tmp_path):
    synthetic_library(tmp_path, nt=2, n=12, size_px=16)
    (tmp_path / "PLAX_NormalView.gif").write_bytes(b"GIF89anot really")
    with pytest.raises(DecodeError) as exc:
        load_manifest(tmp_path / MANIFEST_NAME)
    assert "PLAX/NormalView" in str(exc.value)


def test_schema_errors(tmp_path):
    path = tmp_path / MANIFEST_NAME

    path.write_text("{not json")
    with pytest.raises(SchemaError):
        load_manifest(path)

    path.write_text(json.dumps([1, 2]))
    with pytest.raises(SchemaError):
        load_manifest(path)

    path.write_text(json.dumps({"entries": {}, "planes": {}, "sensors": {}}))
    with pytest.raises(SchemaError) as exc:
        load_manifest(path)
    assert "no entries" in str(exc.value)

    path.write_text(json.dumps({"entries": {"Apical/TiltView": {}}, "planes": {}}))
    with pytest.raises(SchemaError):
        load_manifest(path)


def test_schema_rejects_bad_sensor_and_dangling_entry(tmp_path):
    synthetic_library(tmp_path, nt=2, n=12, size_px=16)
    path = tmp_path / MANIFEST_NAME
    doc = json.loads(path.read_text())

    bad = json.loads(json.dumps(doc))
    bad["sensors"]["Apical"] = 9
    path.write_text(json.dumps(bad))
    with pytest.raises(SchemaError):
        load_manifest(path)

    bad = json.loads(json.dumps(doc))
    del bad["planes"]["Apical"]
    path.write_text(json.dumps(bad))
    with pytest.raises(SchemaError):
        load_manifest(path)

    bad = json.loads(json.dumps(doc))
    bad["entries"]["Apical/TiltView"].pop("frame_period_ms")
    path.write_text(json.dumps(bad))
    with pytest.raises(SchemaError):
        load_manifest(path)


def test_build_assets_validation(tmp_path):
    with pytest.raises(ValueError):
        build_assets({}, {}, tmp_path)
    vols = {(View.APICAL, TiltClass.TILT_VIEW): synthetic_sequence(nt=2, n=12)}
    with pytest.raises(ValueError) as exc:
        build_assets(vols, {}, tmp_path)
    assert "Apical" in str(exc.value)
    planes = default_planes(vols[(View.APICAL, TiltClass.TILT_VIEW)].frames[0], 16)
    with pytest.raises(ValueError):
        build_assets(vols, planes, tmp_path, sensors={View.PLAX: 1})


def test_default_planes_cover_all_views():
    frame = synthetic_sequence(nt=1, n=16).frames[0]
    planes = default_planes(frame, size_px=20)
    assert set(planes) == set(View)
    for plane in planes.values():
        assert (plane.width_px, plane.height_px) == (20, 20)
        u, v = np.array(plane.u), np.array(plane.v)
        assert abs(np.dot(u, v)) < 1e-9
    # orientations differ between views
    us = {tuple(np.round(p.u, 6)) for p in planes.values()}
    assert len(us) > 1


def test_synthetic_sequence_is_animated():
    seq = synthetic_sequence(nt=4, n=16)
    assert seq.nt == 4
    assert seq.dims == (16, 16, 16)
    assert any(not np.array_equal(seq.frames[0].voxels, f.voxels)
               for f in seq.frames[1:])
    accented = synthetic_sequence(nt=4, n=16, accent=1.0)
    assert not np.array_equal(seq.frames[0].voxels, accented.frames[0].voxels)
