"""Public archive export: every completed project in one text file.

The file reuses the record text format: a header record (kind
``archive``, carrying the entry count) and one ``archive_entry`` record
per completed project, records separated by a blank line. Entries are
sorted by completion time then id, and contain nothing that varies
between runs, so re-exporting an unchanged store is byte-identical.
"""

from .models import Project, ProjectState, format_grade
from .records import RecordFile, encode_record


def build_archive(projects: list, group_names: dict) -> bytes:
    """Serialize Previous projects; ``group_names`` maps group id -> name."""
    previous = [p for p in projects if p.state is ProjectState.PREVIOUS]
    previous.sort(key=lambda p: (p.state_changed_at_ms, p.id))

    header = RecordFile(kind="archive")
    header.set("count", str(len(previous)))
    chunks = [encode_record(header)]

    for project in previous:
        entry = RecordFile(kind="archive_entry")
        entry.set("id", project.id)
        entry.set("title", project.title)
        entry.set("group_name", group_names.get(project.group_id, ""))
        entry.set("abstract", project.abstract)
        entry.set("description", project.description)
        entry.set("completed_at", str(project.state_changed_at_ms))
        for stage in sorted(project.submissions):
            sub = project.submissions[stage]
            if sub.grade_tenths is not None:
                entry.add("grade", f"{stage}={format_grade(sub.grade_tenths)}")
        chunks.append(encode_record(entry))

    return b"\n".join(chunks)
