"""Senior project management service.

Carries capstone projects through their whole lifecycle: instructors
propose project ideas, student groups select them (or pitch their own,
pending approval), active groups submit stage reports that instructors
grade and comment on, and finished projects are archived publicly with
their stage files disposed of.

Storage is plain text files with atomic, crash-safe writes; uploads are
virus-scanned in a quarantine area before they reach the blob store.
"""

__version__ = "0.1.0"
