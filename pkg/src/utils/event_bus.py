"""
Event bus for progress reporting between the solver and its observers.
"""
import logging
import threading
from dataclasses import dataclass
from typing import Any, Callable, Dict, List

logger = logging.getLogger(__name__)

STEP_COMPLETED = "step_completed"
SNAPSHOT_STORED = "snapshot_stored"
RUN_FINISHED = "run_finished"


@dataclass
class Event:
    """Represents an event in the system."""
    name: str
    data: Any = None


class EventBus:
    """Thread-safe event bus; integrators publish, loggers and collectors subscribe."""

    def __init__(self):
        self._handlers: Dict[str, List[Callable[[Event], None]]] = {}
        self._lock = threading.RLock()

    def subscribe(self, event_name: str, handler: Callable[[Event], None]) -> None:
        """Subscribe to an event."""
        with self._lock:
            handlers = self._handlers.setdefault(event_name, [])
            if handler not in handlers:
                handlers.append(handler)

    def unsubscribe(self, event_name: str, handler: Callable[[Event], None]) -> None:
        """Unsubscribe from an event."""
        with self._lock:
            try:
                self._handlers.get(event_name, []).remove(handler)
            except ValueError:
                pass

    def publish(self, event_name: str, data: Any = None) -> None:
        """Publish an event to all subscribers."""
        event = Event(name=event_name, data=data)

        with self._lock:
            handlers = list(self._handlers.get(event_name, []))

        # Handlers run outside the lock so they may publish in turn
        for handler in handlers:
            try:
                handler(event)
            except Exception as e:
                logger.error(f"Error in event handler for {event_name}: {e}", exc_info=True)
