from .config import settings
from .exceptions import SurfaceFlowException

__all__ = ["settings", "SurfaceFlowException"]
