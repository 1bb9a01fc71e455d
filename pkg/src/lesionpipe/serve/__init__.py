"""HTTP classification service and the serving-side model/feedback state."""

from .app import ServiceContext, create_app
from .model_store import ModelSnapshot, ModelStore
from .stores import FeedbackStore, RequestEntry, RequestLog

__all__ = ["FeedbackStore", "ModelSnapshot", "ModelStore", "RequestEntry",
           "RequestLog", "ServiceContext", "create_app"]
