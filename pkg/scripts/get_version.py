from typing import Optional
import subprocess
import re
import os


def _candidate_from_commit_messages(max_commits: int = 200) -> Optional[str]:
    """Return a release token like '2B' found at the head of a recent commit message.

    Commit subjects of the form '<digits><optional-letter> - message' mark releases.
    """
    try:
        revs = subprocess.check_output(["git", "rev-list", f"--max-count={max_commits}", "HEAD"], text=True,
                                       stderr=subprocess.DEVNULL)
    except Exception:
        return None
    for rev in revs.splitlines():
        try:
            msg = subprocess.check_output(["git", "log", "-1", "--pretty=%s", rev], text=True)
        except Exception:
            continue
        head = msg.split("-", 1)[0].strip() if "-" in msg else ""
        if re.fullmatch(r"[0-9]+[A-Za-z]?", head):
            return head
    return None


def _candidate_from_git_tags() -> Optional[str]:
    """Return the release token of the nearest tag reachable from HEAD, if it is one."""
    try:
        tag = subprocess.check_output(["git", "describe", "--tags", "--abbrev=0"], text=True,
                                      stderr=subprocess.DEVNULL).strip()
    except Exception:
        return None
    return tag if re.fullmatch(r"[0-9]+[A-Za-z]?", tag) else None


def release_to_version(token: str) -> str:
    """'2B' -> '2.1.0': digits give the major number, the letter (A=0) the minor."""
    m = re.fullmatch(r"([0-9]+)([A-Za-z])?", token)
    if not m:
        return "0.0.0"
    minor = ord(m[2].upper()) - ord("A") if m[2] else 0
    return f"{m[1]}.{minor}.0"


def resolve() -> tuple[str, str]:
    """(display name, numeric version), environment first, then git, then dev/0.0.0."""
    display = os.environ.get("RELEASE_DISPLAY_NAME")
    version = os.environ.get("PLRTEST_VERSION")
    if not (display and version):
        token = _candidate_from_commit_messages() or _candidate_from_git_tags()
        if token:
            display = display or token
            version = version or release_to_version(token)
    return display or "dev", version or "0.0.0"


RELEASE_DISPLAY_NAME, PLRTEST_VERSION = resolve()


def get_plrtest_version() -> str:
    """Return the numeric plrtest version string (e.g. '2.1.0')."""
    return PLRTEST_VERSION


def get_release_display_name() -> str:
    """Return the human release display name (e.g. '2B')."""
    return RELEASE_DISPLAY_NAME


if __name__ == "__main__":
    print(get_plrtest_version())
