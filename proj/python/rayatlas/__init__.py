"""External rays, semiconjugacies and orbit portraits for polynomials with disconnected Julia sets.

Thin wrapper over the native core. Every call takes keyword options named like
the command line flags (snake_case here, kebab-case on the command line) and
returns the same JSON documents the ``rayatlas`` tool writes.
"""

import json
import os
import re

from . import _core

__all__ = [
    "RayAtlasError",
    "trace",
    "angle_set",
    "semiconj",
    "portrait",
    "surgery_model",
    "verify",
    "render",
    "analyze",
    "read_ppm",
]


class RayAtlasError(RuntimeError):
    """Raised for every library failure; ``code`` is the machine-readable error code."""

    def __init__(self, message):
        super().__init__(message)
        self.code = message.split(":", 1)[0] if ":" in message else "Internal"


def _request(poly=None, **options):
    req = {}
    if poly is not None:
        req["poly"] = os.fspath(poly) if isinstance(poly, (str, os.PathLike)) else poly
    for key, value in options.items():
        if value is None:
            continue
        if isinstance(value, os.PathLike):
            value = os.fspath(value)
        if isinstance(value, complex):
            value = [value.real, value.imag]
        req[key.replace("_", "-")] = value
    return json.dumps(req)


def _call(fn, request):
    try:
        return fn(request)
    except _core.RayAtlasError as e:
        raise RayAtlasError(str(e)) from None


def _json(fn, request):
    return json.loads(_call(fn, request))


def trace(poly, angle="0/1", side="smooth", **options):
    """Trace R_angle (side: smooth, plus, minus). Options: s_min, steps_per_level, eps0, ..."""
    return _json(_core.trace, _request(poly, angle=angle, side=side, **options))


def angle_set(poly, levels=6, potential=None, **options):
    return _json(_core.angle_set, _request(poly, levels=levels, potential=potential, **options))


def semiconj(poly, tau=("0/1",), **options):
    return _json(_core.semiconj, _request(poly, tau=list(tau), **options))


def portrait(doc):
    """Orbit portrait, sectors and audits from a portrait document (dict or path)."""
    if isinstance(doc, (str, os.PathLike)):
        with open(doc) as f:
            doc = json.load(f)
    return _json(_core.portrait, json.dumps(doc))


def surgery_model(D, d, j=0, choices=()):
    return _json(_core.surgery_model, json.dumps({"D": D, "d": d, "j": j, "choices": list(choices)}))


def verify(poly, model, **options):
    if isinstance(model, (str, os.PathLike)):
        with open(model) as f:
            model = json.load(f)
    return _json(_core.verify, _request(poly, model=model, **options))


def render(poly, ray=(), level=(), critical=True, **options):
    """PPM (P6) bytes of the escape-time picture with ray and equipotential overlays."""
    return _call(_core.render, _request(poly, ray=list(ray), level=list(level), critical=critical, **options))


def analyze(poly, out_dir, **options):
    """Full pipeline; writes report.json, report.txt, stages/ and image.ppm into out_dir."""
    return _json(_core.analyze, _request(poly, out_dir=out_dir, **options))


def read_ppm(data):
    """(width, height, rgb bytes) of a binary PPM."""
    m = re.match(rb"P6\s+(\d+)\s+(\d+)\s+255\s", data)
    if not m:
        raise ValueError("not an 8-bit P6 image")
    width, height = int(m.group(1)), int(m.group(2))
    pixels = data[m.end():]
    if len(pixels) != 3 * width * height:
        raise ValueError("truncated P6 image")
    return width, height, pixels
