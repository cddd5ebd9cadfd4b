"""Exception hierarchy shared across the package."""
from __future__ import annotations


class SynthscanError(Exception):
    """Base class for all domain errors raised by this package."""


class EmptyScene(SynthscanError):
    pass


class MalformedObj(SynthscanError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"OBJ line {line}: {reason}")
        self.line = line
        self.reason = reason


class MissingFile(SynthscanError):
    pass


class GroundTooSmall(SynthscanError):
    pass


class MalformedSceneXml(SynthscanError):
    def __init__(self, element: str, reason: str):
        super().__init__(f"scene XML <{element}>: {reason}")
        self.element = element
        self.reason = reason


class MissingAsset(SynthscanError):
    def __init__(self, path: str):
        super().__init__(f"asset not found: {path}")
        self.path = path


class RotationUnsupported(SynthscanError):
    pass


class MalformedSurveyXml(SynthscanError):
    def __init__(self, element: str, reason: str):
        super().__init__(f"survey XML <{element}>: {reason}")
        self.element = element
        self.reason = reason


class NoLegs(SynthscanError):
    pass


class UnknownPreset(SynthscanError):
    pass


class MalformedXyz(SynthscanError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"XYZ line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class EmptyCloud(SynthscanError):
    pass
