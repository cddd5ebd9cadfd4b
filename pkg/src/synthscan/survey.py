"""Survey model: scanner settings, legs, presets and the survey XML format.

Angles are degrees here and in the XML; the simulator converts to radians.
Azimuth sweeps are end-exclusive (a full circle has no duplicated seam
column); elevation sweeps include both endpoints.
"""
from __future__ import annotations

from dataclasses import dataclass
from xml.etree import ElementTree as ET

import numpy as np

from .errors import MalformedSurveyXml, NoLegs, UnknownPreset
from .geometry import vec3

XML_DECLARATION = b'<?xml version="1.0"?>\n'
DEFAULT_SEED = 42


def _fmt(x: float) -> str:
    return repr(float(x))


@dataclass(frozen=True)
class ScannerSettings:
    horiz_start: float            # deg
    horiz_end: float              # deg
    horiz_res: float              # deg per azimuth step
    vert_start: float             # deg
    vert_end: float               # deg
    vert_res: float               # deg per elevation step
    max_range: float              # m
    range_noise_sigma: float = 0.0   # m, 1-sigma additive range noise
    beam_divergence: float = 0.0     # mrad, full cone angle
    beam_sample_quality: int = 1     # concentric subray rings

    def __post_init__(self):
        if not self.horiz_start < self.horiz_end:
            raise ValueError("horiz_start must be < horiz_end")
        if not self.vert_start <= self.vert_end:
            raise ValueError("vert_start must be <= vert_end")
        if self.horiz_res <= 0 or self.vert_res <= 0:
            raise ValueError("angular resolutions must be > 0")
        if self.max_range <= 0:
            raise ValueError("max_range must be > 0")
        if self.range_noise_sigma < 0:
            raise ValueError("range_noise_sigma must be >= 0")
        if self.beam_divergence < 0:
            raise ValueError("beam_divergence must be >= 0")
        if self.beam_sample_quality < 1:
            raise ValueError("beam_sample_quality must be >= 1")


def azimuth_steps(settings: ScannerSettings) -> int:
    """Number of azimuth columns: round(span/res), end angle excluded, so a
    360 degree sweep never doubles the wrap column."""
    return int(round((settings.horiz_end - settings.horiz_start) / settings.horiz_res))


def elevation_steps(settings: ScannerSettings) -> int:
    """Number of elevation rows: round(span/res) + 1, both endpoints included."""
    return int(round((settings.vert_end - settings.vert_start) / settings.vert_res)) + 1


@dataclass
class Leg:
    position: np.ndarray              # (3,) m
    index: int
    settings: ScannerSettings | None = None  # per-leg override


@dataclass
class Survey:
    name: str
    scene_path: str
    scene_id: str
    settings: ScannerSettings
    legs: list[Leg]
    seed: int = DEFAULT_SEED

    def leg_settings(self, leg: Leg) -> ScannerSettings:
        return leg.settings if leg.settings is not None else self.settings


_PRESETS = {
    # Horizontal sweep, resolution and range follow the generic rotating
    # lidar configuration (a single horizon scanline, no beam spread).
    "generic-lidar": ScannerSettings(
        horiz_start=-180.0, horiz_end=180.0, horiz_res=0.05,
        vert_start=0.0, vert_end=0.0, vert_res=1.0,
        max_range=100.0, range_noise_sigma=0.0,
        beam_divergence=0.0, beam_sample_quality=1),
    # Plausible tripod TLS figures; artifact defaults, not vendor values.
    "tls-default": ScannerSettings(
        horiz_start=0.0, horiz_end=360.0, horiz_res=0.04,
        vert_start=-40.0, vert_end=60.0, vert_res=0.04,
        max_range=120.0, range_noise_sigma=0.002,
        beam_divergence=0.3, beam_sample_quality=3),
}

PRESET_NAMES = tuple(sorted(_PRESETS))


def preset(name: str) -> ScannerSettings:
    try:
        return _PRESETS[name]
    except KeyError:
        raise UnknownPreset(f"unknown preset {name!r}; have {', '.join(PRESET_NAMES)}") from None


# -- survey XML ---------------------------------------------------------------

_SETTINGS_ATTRS = (
    ("horizStart_deg", "horiz_start", float),
    ("horizEnd_deg", "horiz_end", float),
    ("horizRes_deg", "horiz_res", float),
    ("vertStart_deg", "vert_start", float),
    ("vertEnd_deg", "vert_end", float),
    ("vertRes_deg", "vert_res", float),
    ("maxRange_m", "max_range", float),
    ("rangeNoiseSigma_m", "range_noise_sigma", float),
    ("beamDivergence_mrad", "beam_divergence", float),
    ("beamSampleQuality", "beam_sample_quality", int),
)


def _settings_element(tag_parent: ET.Element, settings: ScannerSettings) -> None:
    attrs = {}
    for attr, field, kind in _SETTINGS_ATTRS:
        value = getattr(settings, field)
        attrs[attr] = str(int(value)) if kind is int else _fmt(value)
    ET.SubElement(tag_parent, "scannerSettings", **attrs)


def _parse_settings(el: ET.Element) -> ScannerSettings:
    kwargs = {}
    for attr, field, kind in _SETTINGS_ATTRS:
        raw = el.get(attr)
        if raw is None:
            raise MalformedSurveyXml("scannerSettings", f"missing attribute {attr}")
        try:
            kwargs[field] = kind(raw)
        except ValueError:
            raise MalformedSurveyXml(
                "scannerSettings", f"bad value {raw!r} for {attr}") from None
    try:
        return ScannerSettings(**kwargs)
    except ValueError as exc:
        raise MalformedSurveyXml("scannerSettings", str(exc)) from None


def write_survey_xml(survey: Survey) -> bytes:
    if not survey.legs:
        raise NoLegs(f"survey {survey.name!r} has no legs")
    root = ET.Element("document")
    sv = ET.SubElement(root, "survey", name=survey.name,
                       scene=f"{survey.scene_path}#{survey.scene_id}",
                       seed=str(int(survey.seed)))
    _settings_element(sv, survey.settings)
    for leg in survey.legs:
        le = ET.SubElement(sv, "leg")
        ET.SubElement(le, "platformSettings",
                      x=_fmt(leg.position[0]), y=_fmt(leg.position[1]),
                      z=_fmt(leg.position[2]))
        if leg.settings is not None:
            _settings_element(le, leg.settings)
    ET.indent(root)
    return XML_DECLARATION + ET.tostring(root) + b"\n"


def parse_survey_xml(data: bytes) -> Survey:
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise MalformedSurveyXml("document", f"not well-formed: {exc}") from None
    if root.tag != "document":
        raise MalformedSurveyXml(root.tag, "root element must be <document>")
    sv = root.find("survey")
    if sv is None:
        raise MalformedSurveyXml("document", "no <survey> element")
    name = sv.get("name")
    if not name:
        raise MalformedSurveyXml("survey", "missing name attribute")
    scene_ref = sv.get("scene", "")
    if "#" in scene_ref:
        scene_path, scene_id = scene_ref.rsplit("#", 1)
    else:
        scene_path, scene_id = scene_ref, ""
    if not scene_path:
        raise MalformedSurveyXml("survey", "missing scene reference")
    try:
        seed = int(sv.get("seed", str(DEFAULT_SEED)))
    except ValueError:
        raise MalformedSurveyXml("survey", "seed must be an integer") from None

    defaults_el = sv.find("scannerSettings")
    if defaults_el is None:
        raise MalformedSurveyXml("survey", "missing default <scannerSettings>")
    defaults = _parse_settings(defaults_el)

    legs: list[Leg] = []
    for index, le in enumerate(sv.findall("leg")):
        pe = le.find("platformSettings")
        if pe is None:
            raise MalformedSurveyXml("leg", "missing <platformSettings>")
        try:
            pos = vec3(float(pe.get("x")), float(pe.get("y")), float(pe.get("z")))
        except (TypeError, ValueError):
            raise MalformedSurveyXml("leg", "platformSettings needs numeric x, y, z") from None
        override_el = le.find("scannerSettings")
        override = _parse_settings(override_el) if override_el is not None else None
        legs.append(Leg(position=pos, index=index, settings=override))
    if not legs:
        raise NoLegs(f"survey {name!r} has no legs")
    return Survey(name=name, scene_path=scene_path, scene_id=scene_id,
                  settings=defaults, legs=legs, seed=seed)


def with_settings(survey: Survey, settings: ScannerSettings) -> Survey:
    """Copy of the survey with new default settings and overrides cleared."""
    legs = [Leg(position=l.position.copy(), index=l.index) for l in survey.legs]
    return Survey(name=survey.name, scene_path=survey.scene_path,
                  scene_id=survey.scene_id, settings=settings,
                  legs=legs, seed=survey.seed)
