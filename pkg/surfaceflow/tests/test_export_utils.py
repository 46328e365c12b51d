import csv
import math

import numpy as np
import pytest

from app.core.constants import PROFILE_COLUMNS
from app.schemas.surface import NormalProfile, ProfileCurve, RevolutionSurface
from app.services.flow_service import flow_service
from app.utils import export_utils


def _lines(text, prefix):
    return [line for line in text.splitlines() if line.startswith(prefix + " ")]


class TestObj:
    def test_open_band(self):
        surface = RevolutionSurface(profile=ProfileCurve(f=(1.0, 2.0, 2.5), h=(0.0, 1.0, 1.5)), l=8)
        text = export_utils.export_obj(surface, comment="band")
        assert "# band" in text
        assert len(_lines(text, "v")) == 8 * 3
        assert len(_lines(text, "vn")) == 0
        faces = _lines(text, "f")
        assert len(faces) == 8 * 2
        assert all(len(face.split()) == 5 for face in faces)

    def test_cone_tip_is_shared(self, sphere_cone):
        surface = RevolutionSurface(profile=sphere_cone.profile(), l=sphere_cone.l)
        text = export_utils.export_obj(surface, flow_service.normals(sphere_cone))
        k, l = sphere_cone.k, sphere_cone.l
        assert len(_lines(text, "v")) == l * k + 1
        assert len(_lines(text, "vn")) == l * k + l
        faces = _lines(text, "f")
        assert len(faces) == l * k
        triangles = [face for face in faces if len(face.split()) == 4]
        assert len(triangles) == l
        assert all(face.split()[3].startswith(f"{l * k + 1}//") for face in triangles)

    def test_vertices_use_full_precision(self):
        surface = RevolutionSurface(profile=ProfileCurve(f=(0.1, 0.2), h=(0.0, 1.0 / 3.0)), l=3)
        vertex = _lines(export_utils.export_obj(surface), "v")[0].split()
        assert float(vertex[1]) == 0.1


class TestCsv:
    def test_format_number(self):
        assert export_utils.format_number(0.1) == "0.10000000000000001"
        assert export_utils.format_number(np.int64(3)) == "3"
        assert export_utils.format_number("") == ""

    def test_profile_csv(self, output_dir, spindle):
        surface, normals = spindle
        u = tuple(math.pi * n / 12 for n in range(7))
        target = export_utils.write_profile_csv("out/profile.csv", surface.profile, normals, u)
        assert target == output_dir / "out" / "profile.csv"
        with open(target, newline="") as fh:
            rows = list(csv.reader(fh))
        assert tuple(rows[0]) == PROFILE_COLUMNS
        assert len(rows) == 8
        assert float(rows[3][3]) == surface.profile.h[2]

    def test_trace_csv_leaves_tip_layer_blank(self, output_dir, sphere_cone):
        trace = flow_service.integrate(sphere_cone, 0.002, dt=1e-3, stride=1)
        target = export_utils.write_trace_csv("trace.csv", trace)
        with open(target, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == len(trace.times) * (sphere_cone.k + 1)
        assert rows[sphere_cone.k + 1]["t"] == export_utils.format_number(trace.times[1])
        assert rows[-1]["K"] == ""
        assert float(rows[0]["K"]) == pytest.approx(1.0, abs=1e-10)


def test_profile_json_round_trip(output_dir, spindle):
    surface, normals = spindle
    export_utils.write_profile_json("profile.json", surface.profile, surface.l, normals, family="sphere_positive")
    document = export_utils.read_profile_json("profile.json")
    assert document.profile() == surface.profile
    assert document.normals() == normals
    assert document.l == 24


def test_read_profile_json_errors(output_dir):
    (output_dir / "bad.json").write_text('{"version": 1, "k": 2, "l": 8, "f": [1, 0], "h": [0, 1]}')
    with pytest.raises(export_utils.ConfigError):
        export_utils.read_profile_json("bad.json")
    with pytest.raises(export_utils.ConfigError):
        export_utils.read_profile_json("missing.json")


def test_fit_payload_keys(sphere_cone):
    payload = export_utils.fit_payload(flow_service.fit(sphere_cone))
    assert list(payload) == ["family", "c", "p", "u", "h_err", "K_spread"]
    assert payload["c"] == pytest.approx(1.0, abs=1e-10)
    assert len(payload["u"]) == sphere_cone.k + 1
