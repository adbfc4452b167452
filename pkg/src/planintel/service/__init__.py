from .app import ServiceError, create_app
from .store import (
    DuplicateDocument,
    JobRecord,
    LockingAuditLog,
    ServiceStore,
    UnknownDocument,
    UnknownItem,
    UnknownJob,
    detection_from_payload,
    detection_payload,
    item_kind,
    review_item_from_payload,
    review_item_payload,
)

__all__ = [
    "DuplicateDocument",
    "JobRecord",
    "LockingAuditLog",
    "ServiceError",
    "ServiceStore",
    "UnknownDocument",
    "UnknownItem",
    "UnknownJob",
    "create_app",
    "detection_from_payload",
    "detection_payload",
    "item_kind",
    "review_item_from_payload",
    "review_item_payload",
]
