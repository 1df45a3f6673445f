"""discoursekit: discourse-function classification and group analytics for
short classroom microblog messages.
"""

__version__ = "0.1.0"

from discoursekit.corpus import (  # noqa: F401
    CLASS_ORDER,
    Corpus,
    GroupMetadata,
    Label,
    Level,
    Message,
    Role,
    Subject,
)
