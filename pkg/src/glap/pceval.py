"""Pairwise-comparison analysis: observer screening, preference
probabilities and Bradley-Terry scores."""
from __future__ import annotations

import csv
import itertools
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

OUTLIER_THRESHOLD = 0.9
BT_TOL = 1e-8
BT_MAX_ITER = 10_000
OUTCOMES = {"a": "A", "b": "B", "tie": "tie", "a=b": "tie", "=": "tie"}
VOTE_COLUMNS = ("observer_id", "image_id", "stimulus_a", "stimulus_b", "outcome")


class VoteFileError(ValueError):
    pass


class IncompleteDesignError(ValueError):
    def __init__(self, message, missing):
        super().__init__(message)
        self.missing = missing


class DisconnectedComparisonError(ValueError):
    def __init__(self, message, components):
        super().__init__(message)
        self.components = components


@dataclass(frozen=True)
class PreferenceRecord:
    observer: str
    image: str
    a: str
    b: str
    outcome: str  # "A", "B" or "tie"

    def __post_init__(self):
        if self.a == self.b:
            raise ValueError(f"stimulus compared with itself: {self.a!r}")
        if self.outcome not in ("A", "B", "tie"):
            raise ValueError(f"outcome must be A, B or tie, got {self.outcome!r}")

    @property
    def winner(self) -> str | None:
        return {"A": self.a, "B": self.b}.get(self.outcome)


def read_votes(path) -> list[PreferenceRecord]:
    path = Path(path)
    text = path.read_text()
    if not text.strip():
        raise VoteFileError(f"{path}: empty vote file")
    rows = csv.DictReader(text.splitlines())
    missing = [c for c in VOTE_COLUMNS if c not in (rows.fieldnames or [])]
    if missing:
        raise VoteFileError(f"{path}: missing column(s) {', '.join(missing)}")
    records, errors = [], []
    for lineno, row in enumerate(rows, start=2):
        try:
            vals = {c: (row[c] or "").strip() for c in VOTE_COLUMNS}
            if not all(vals.values()):
                raise ValueError("blank field")
            outcome = OUTCOMES.get(vals["outcome"].lower())
            if outcome is None:
                raise ValueError(f"bad outcome {vals['outcome']!r}")
            records.append(
                PreferenceRecord(vals["observer_id"], vals["image_id"], vals["stimulus_a"], vals["stimulus_b"], outcome)
            )
        except (ValueError, AttributeError) as exc:
            errors.append(f"line {lineno}: {exc}")
    if errors:
        raise VoteFileError(f"{path}: malformed rows\n  " + "\n  ".join(errors))
    if not records:
        raise VoteFileError(f"{path}: no votes")
    return records


# --------------------------------------------------------------------------
# Transitivity


def strict_preference_matrix(records, stimuli) -> np.ndarray:
    """A[i, j] = 1 when i was strictly preferred to j; ties leave both 0."""
    idx = {s: k for k, s in enumerate(stimuli)}
    adj = np.zeros((len(stimuli), len(stimuli)), dtype=np.int64)
    for r in records:
        w = r.winner
        if w is not None:
            loser = r.b if w == r.a else r.a
            adj[idx[w], idx[loser]] = 1
    return adj


def count_circular_triads(adj: np.ndarray) -> int:
    """Each circular triad is one directed 3-cycle, seen 3 times in tr(A^3)."""
    return int(np.trace(adj @ adj @ adj)) // 3


@dataclass(frozen=True)
class TransitivityResult:
    observer: str
    circular_triads: int
    comparisons: int
    rate: float
    outlier: bool


def transitivity_rate(records, stimuli_by_image=None, threshold: float = OUTLIER_THRESHOLD) -> TransitivityResult:
    """R_o = 1 - d_o / h_o for one observer's votes.

    Triads are counted per image over complete designs. ``stimuli_by_image``
    fixes the stimulus set of each image (default: those the observer saw).
    """
    records = list(records)
    if not records:
        raise ValueError("no records")
    observers = {r.observer for r in records}
    if len(observers) != 1:
        raise ValueError(f"records from several observers: {sorted(observers)}")
    by_image = defaultdict(list)
    for r in records:
        by_image[r.image].append(r)
    triads = 0
    missing = []
    for image, recs in by_image.items():
        stimuli = sorted(stimuli_by_image[image]) if stimuli_by_image else sorted({s for r in recs for s in (r.a, r.b)})
        seen = defaultdict(int)
        for r in recs:
            seen[frozenset((r.a, r.b))] += 1
        dup = [tuple(sorted(p)) for p, c in seen.items() if c > 1]
        if dup:
            raise ValueError(f"image {image}: pairs voted more than once: {dup}")
        missing += [(image, a, b) for a, b in itertools.combinations(stimuli, 2) if frozenset((a, b)) not in seen]
        if not missing:
            triads += count_circular_triads(strict_preference_matrix(recs, stimuli))
    if missing:
        listing = ", ".join(f"{img}:{a}-{b}" for img, a, b in missing)
        raise IncompleteDesignError(f"observer {records[0].observer}: incomplete design, missing {listing}", missing)
    rate = 1.0 - triads / len(records)
    return TransitivityResult(records[0].observer, triads, len(records), rate, rate < threshold)


# --------------------------------------------------------------------------
# Preference matrices


@dataclass(frozen=True, eq=False)
class PreferenceMatrix:
    stimuli: tuple[str, ...]
    wins: np.ndarray  # wins[i, j]: times i beat j, ties split 0.5/0.5
    votes: np.ndarray  # votes[i, j] = votes[j, i]: times the pair was shown
    observers: int

    @classmethod
    def from_records(cls, records, stimuli=None) -> "PreferenceMatrix":
        records = list(records)
        if stimuli is None:
            stimuli = sorted({s for r in records for s in (r.a, r.b)})
        stimuli = tuple(stimuli)
        idx = {s: k for k, s in enumerate(stimuli)}
        n = len(stimuli)
        wins = np.zeros((n, n))
        votes = np.zeros((n, n))
        for r in records:
            i, j = idx[r.a], idx[r.b]
            votes[i, j] += 1
            votes[j, i] += 1
            if r.outcome == "A":
                wins[i, j] += 1
            elif r.outcome == "B":
                wins[j, i] += 1
            else:
                wins[i, j] += 0.5
                wins[j, i] += 0.5
        return cls(stimuli, wins, votes, len({r.observer for r in records}))

    @classmethod
    def from_counts(cls, stimuli, wins, observers: int | None = None) -> "PreferenceMatrix":
        wins = np.asarray(wins, dtype=float)
        votes = wins + wins.T
        np.fill_diagonal(votes, 0.0)
        obs = int(votes.max()) if observers is None else observers
        return cls(tuple(stimuli), wins, votes, obs)


def preference_probabilities(matrix: PreferenceMatrix) -> np.ndarray:
    """P[i, j] = w_ij / (votes on the pair); NaN where the pair was never shown.

    With a complete design every pair is seen by all O observers and this is
    w_ij / O.
    """
    if matrix.observers <= 0:
        raise ValueError("no observers")
    with np.errstate(invalid="ignore", divide="ignore"):
        p = matrix.wins / matrix.votes
    p[matrix.votes == 0] = np.nan
    return p


def average_probabilities(matrices) -> np.ndarray:
    """Element-wise mean of probability matrices over images (NaN-aware)."""
    stack = np.stack(list(matrices))
    with np.errstate(invalid="ignore"):
        counts = np.sum(np.isfinite(stack), axis=0)
        out = np.nansum(stack, axis=0) / counts
    out[counts == 0] = np.nan
    return out


# --------------------------------------------------------------------------
# Bradley-Terry


@dataclass(frozen=True, eq=False)
class BTResult:
    stimuli: tuple[str, ...]
    strengths: np.ndarray  # geometric mean 1 over stimuli with wins
    log_scores: np.ndarray  # sum to 0 over stimuli with wins
    zero_wins: np.ndarray  # bool, strength driven to 0
    iterations: int
    converged: bool


def _components(votes: np.ndarray) -> list[list[int]]:
    n = votes.shape[0]
    seen = np.zeros(n, dtype=bool)
    comps = []
    for start in range(n):
        if seen[start]:
            continue
        stack, comp = [start], []
        seen[start] = True
        while stack:
            i = stack.pop()
            comp.append(i)
            for j in np.flatnonzero(votes[i] > 0):
                if not seen[j]:
                    seen[j] = True
                    stack.append(j)
        comps.append(sorted(comp))
    return comps


def bradley_terry_scores(matrix: PreferenceMatrix, tol: float = BT_TOL, max_iter: int = BT_MAX_ITER) -> BTResult:
    """Maximum-likelihood strengths by the MM iteration.

    Stops when the largest relative change drops below ``tol``.
    """
    wins, votes = matrix.wins, matrix.votes
    n = len(matrix.stimuli)
    comps = _components(votes)
    if len(comps) > 1:
        names = [[matrix.stimuli[i] for i in c] for c in comps]
        raise DisconnectedComparisonError(f"comparison graph is disconnected: {names}", names)
    total_wins = wins.sum(axis=1)
    zero = total_wins <= 0
    p = np.where(zero, 0.0, 1.0)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        with np.errstate(divide="ignore", invalid="ignore"):
            denom = np.where(votes > 0, votes / (p[:, None] + p[None, :]), 0.0).sum(axis=1)
            new = np.where(zero, 0.0, total_wins / denom)
        pos = ~zero
        new[pos] /= np.exp(np.mean(np.log(new[pos])))
        change = np.max(np.abs(new[pos] - p[pos]) / new[pos]) if pos.any() else 0.0
        p = new
        if change < tol:
            converged = True
            break
    with np.errstate(divide="ignore"):
        logs = np.log(p)
    return BTResult(matrix.stimuli, p, logs, zero, it, converged)


# --------------------------------------------------------------------------
# End to end


@dataclass(frozen=True, eq=False)
class EvalReport:
    observers: list[TransitivityResult]
    probabilities: dict[str, tuple[tuple[str, ...], np.ndarray]]
    scores: dict[str, BTResult]

    @property
    def outliers(self) -> list[str]:
        return [o.observer for o in self.observers if o.outlier]

    def write(self, out_dir) -> dict[str, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = {
            "observers": out_dir / "observers.csv",
            "probabilities": out_dir / "probabilities.csv",
            "scores": out_dir / "bt_scores.csv",
        }
        with paths["observers"].open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["observer_id", "R_o", "circular_triads", "comparisons", "outlier"])
            for o in self.observers:
                w.writerow([o.observer, repr(o.rate), o.circular_triads, o.comparisons, int(o.outlier)])
        with paths["probabilities"].open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["image_id", "stimulus_a", "stimulus_b", "P_ab"])
            for image, (stimuli, p) in self.probabilities.items():
                for i, j in itertools.permutations(range(len(stimuli)), 2):
                    if np.isfinite(p[i, j]):
                        w.writerow([image, stimuli[i], stimuli[j], repr(float(p[i, j]))])
        with paths["scores"].open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["image_id", "stimulus", "strength", "log_score", "zero_wins"])
            for image, bt in self.scores.items():
                for k, s in enumerate(bt.stimuli):
                    w.writerow([image, s, repr(float(bt.strengths[k])), repr(float(bt.log_scores[k])), int(bt.zero_wins[k])])
        return paths


def evaluate_votes(records, threshold: float = OUTLIER_THRESHOLD) -> EvalReport:
    """Screen observers, then compute per-image probabilities and BT scores
    from the remaining votes."""
    records = list(records)
    if not records:
        raise ValueError("no votes to evaluate")
    stimuli_by_image = defaultdict(set)
    for r in records:
        stimuli_by_image[r.image].update((r.a, r.b))
    by_obs = defaultdict(list)
    for r in records:
        by_obs[r.observer].append(r)
    screened = [transitivity_rate(recs, stimuli_by_image, threshold) for _, recs in sorted(by_obs.items())]
    bad = {o.observer for o in screened if o.outlier}
    kept = [r for r in records if r.observer not in bad]
    probs, scores = {}, {}
    for image in sorted(stimuli_by_image):
        recs = [r for r in kept if r.image == image]
        if not recs:
            continue
        m = PreferenceMatrix.from_records(recs, sorted(stimuli_by_image[image]))
        probs[image] = (m.stimuli, preference_probabilities(m))
        scores[image] = bradley_terry_scores(m)
    return EvalReport(screened, probs, scores)


def read_probability_table(path):
    """Read a square probability table: header row of column stimuli, then
    one row per stimulus. Cells may be '-' or 'NA'. P[row, col] = P(row > col)."""
    with Path(path).open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    cols = [c.strip() for c in rows[0][1:]]
    labels, vals = [], []
    for r in rows[1:]:
        labels.append(r[0].strip())
        vals.append([float(c) if c.strip() not in ("-", "NA", "") else np.nan for c in r[1:]])
    if labels != cols:
        raise ValueError("probability table rows and columns name different stimuli")
    return tuple(labels), np.array(vals)
