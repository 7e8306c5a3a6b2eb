"""
Neighbor file: one line per target user,

    user_id<TAB>neighbor_id:score,neighbor_id:score,...

with scores at 6 decimal places, neighbors in retrieval order.
"""

from pathlib import Path
from typing import Dict, Iterable, Mapping, Tuple

from main.utils.exceptions import InternalConsistencyError, LeakageError, MissingArtifactError

from .pool import SimilarUser, SimilarUserResult


def format_line(user_id: int, result: SimilarUserResult) -> str:
    neighbors = ",".join(f"{entry.user_id}:{entry.score:.6f}" for entry in result.entries)
    return f"{user_id}\t{neighbors}"


def parse_line(line: str) -> Tuple[int, SimilarUserResult]:
    user_part, _, neighbor_part = line.rstrip("\n").partition("\t")
    try:
        user_id = int(user_part)
        entries = tuple(
            SimilarUser(int(uid), float(score))
            for uid, score in (chunk.split(":") for chunk in neighbor_part.split(",") if chunk)
        )
    except ValueError as e:
        raise InternalConsistencyError(f"malformed neighbor line {line!r}: {e}") from e
    return user_id, SimilarUserResult(entries)


def write_neighbors(path: Path, results: Mapping[int, SimilarUserResult]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [format_line(user_id, results[user_id]) for user_id in sorted(results)]
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    return path


def read_neighbors(path: Path) -> Dict[int, SimilarUserResult]:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"neighbor file {path} does not exist", command="retrieve")
    results = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            user_id, result = parse_line(line)
            results[user_id] = result
    return results


def assert_no_leakage(results: Mapping[int, SimilarUserResult], train_user_ids: Iterable[int]) -> None:
    """Every neighbor must be a train user."""
    allowed = set(int(uid) for uid in train_user_ids)
    for user_id, result in results.items():
        leaked = [uid for uid in result.user_ids if uid not in allowed]
        if leaked:
            raise LeakageError(f"neighbors of user {user_id} include non-train users {leaked}")
