from .app import create_app
from .sessions import AnnotationSession, SessionStore

__all__ = ["AnnotationSession", "SessionStore", "create_app"]
