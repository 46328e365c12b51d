from .surface import ProfileCurve, NormalProfile, RevolutionSurface, FaceGeometry, ProfileDocument
from .family import FamilyKind, SampleGrid, CgcFamily
from .flow import BoundaryCondition, FlowState, FlowTrace, FitReport

__all__ = [
    "ProfileCurve",
    "NormalProfile",
    "RevolutionSurface",
    "FaceGeometry",
    "ProfileDocument",
    "FamilyKind",
    "SampleGrid",
    "CgcFamily",
    "BoundaryCondition",
    "FlowState",
    "FlowTrace",
    "FitReport",
]
