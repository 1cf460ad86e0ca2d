"""News 5W1H element toolkit: corpus handling, validation, SFT export,
prompting, endpoint dispatch, response parsing, scoring, and reporting."""

__version__ = "0.1.0"

from .elements import (  # noqa: F401
    ELEMENT_NAMES,
    ELEMENT_ORDER,
    ElementKind,
    ElementMap,
    element_from_name,
    empty_elements,
    serialize_elements,
)
from .errors import IoFailure, ToolkitError  # noqa: F401
