"""minehub: self-contained software repository mining toolkit.

Harvests git history and issue trackers into one harmonized document
store, links commits to issues, detects bug-inducing changes, merges
developer identities, audits its own completeness, exports release-level
defect datasets, and serves a manual validation API.
"""

__version__ = "0.1.0"

from .store import Range, Store

__all__ = ["Range", "Store", "__version__"]
