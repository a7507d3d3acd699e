import itertools
from pathlib import Path

import numpy as np
import pytest

import oracles
from glap.pceval import (
    DisconnectedComparisonError,
    IncompleteDesignError,
    PreferenceMatrix,
    PreferenceRecord,
    VoteFileError,
    average_probabilities,
    bradley_terry_scores,
    count_circular_triads,
    evaluate_votes,
    preference_probabilities,
    read_probability_table,
    read_votes,
    strict_preference_matrix,
    transitivity_rate,
)

DATA = Path(__file__).parent / "data"
G1 = ("GPP", "PP", "OP", "MOP", "GAP", "GLAP")


def rec(a, b, outcome, obs="o1", image="img"):
    return PreferenceRecord(obs, image, a, b, outcome)


def ranking_votes(order, obs="o1", image="img"):
    """Votes consistent with ``order`` (best first) over every pair."""
    rank = {s: k for k, s in enumerate(order)}
    out = []
    for a, b in itertools.combinations(sorted(order), 2):
        out.append(rec(a, b, "A" if rank[a] < rank[b] else "B", obs, image))
    return out


def test_three_cycle_is_flagged():
    votes = [rec("A", "B", "A"), rec("B", "C", "A"), rec("C", "A", "A")]
    r = transitivity_rate(votes)
    assert r.circular_triads == 1 and r.comparisons == 3
    assert r.rate == pytest.approx(2 / 3) and r.outlier


def test_consistent_ranking_has_no_triads():
    r = transitivity_rate(ranking_votes(["d", "b", "a", "c"]))
    assert r.circular_triads == 0 and r.rate == 1.0 and not r.outlier


def test_ties_never_close_a_triad():
    votes = [rec("A", "B", "A"), rec("B", "C", "A"), rec("C", "A", "tie")]
    assert transitivity_rate(votes).circular_triads == 0


@pytest.mark.parametrize("n", range(3, 9))
def test_triad_count_matches_brute_force(n):
    rng = np.random.default_rng(n)
    for _ in range(30):
        adj = np.zeros((n, n), dtype=np.int64)
        for i, j in itertools.combinations(range(n), 2):
            if rng.random() < 0.5:
                adj[i, j] = 1
            else:
                adj[j, i] = 1
        assert count_circular_triads(adj) == oracles.brute_force_triads(adj)


def test_g1_design_against_brute_force():
    rng = np.random.default_rng(11)
    for _ in range(50):
        votes = [rec(a, b, rng.choice(["A", "B", "tie"], p=[0.45, 0.45, 0.1])) for a, b in itertools.combinations(G1, 2)]
        assert len(votes) == 15
        adj = strict_preference_matrix(votes, sorted(G1))
        r = transitivity_rate(votes)
        assert r.circular_triads == oracles.brute_force_triads(adj)
        assert r.rate == pytest.approx(1 - r.circular_triads / 15)


def test_incomplete_design_names_missing_pairs():
    votes = [rec("A", "B", "A"), rec("B", "C", "A")]
    with pytest.raises(IncompleteDesignError) as err:
        transitivity_rate(votes)
    assert err.value.missing == [("img", "A", "C")]


def test_record_validation():
    with pytest.raises(ValueError):
        rec("A", "A", "A")
    with pytest.raises(ValueError):
        rec("A", "B", "C")


# --------------------------------------------------------------------------
# Probabilities


def test_probabilities_complementary():
    rng = np.random.default_rng(2)
    votes = []
    for o in range(26):
        for a, b in itertools.combinations(G1, 2):
            votes.append(rec(a, b, rng.choice(["A", "B", "tie"]), obs=f"o{o}"))
    m = PreferenceMatrix.from_records(votes)
    p = preference_probabilities(m)
    off = ~np.eye(len(G1), dtype=bool)
    assert np.allclose((p + p.T)[off], 1.0)
    assert np.all(np.isnan(np.diag(p)))


def test_unanimous_and_all_ties():
    m = PreferenceMatrix.from_records([rec("A", "B", "A", obs=f"o{k}") for k in range(26)])
    assert preference_probabilities(m)[0, 1] == 1.0 and m.observers == 26
    m = PreferenceMatrix.from_records([rec("A", "B", "tie", obs=f"o{k}") for k in range(5)])
    assert preference_probabilities(m)[0, 1] == 0.5


def test_unvoted_pairs_are_absent():
    m = PreferenceMatrix.from_records([rec("A", "B", "A")], stimuli=["A", "B", "C"])
    p = preference_probabilities(m)
    assert np.isnan(p[0, 2]) and np.isnan(p[2, 1])


def test_average_probabilities():
    a = np.array([[np.nan, 0.6], [0.4, np.nan]])
    b = np.array([[np.nan, 0.8], [0.2, np.nan]])
    avg = average_probabilities([a, b])
    assert avg[0, 1] == pytest.approx(0.7) and avg[1, 0] == pytest.approx(0.3)


def test_probability_table_parses():
    stimuli, p = read_probability_table(DATA / "g1_preferences.csv")
    assert stimuli == G1
    i, j = stimuli.index("GLAP"), stimuli.index("GAP")
    assert p[i, j] == pytest.approx(0.72) and p[j, i] == pytest.approx(0.28)
    assert np.all(np.isnan(np.diag(p)))


# --------------------------------------------------------------------------
# Bradley-Terry


def test_bt_recovers_generating_strengths():
    s = np.array([1.0, 2.0, 4.0])
    n = 30
    wins = np.array([[n * s[i] / (s[i] + s[j]) if i != j else 0.0 for j in range(3)] for i in range(3)])
    bt = bradley_terry_scores(PreferenceMatrix.from_counts(["a", "b", "c"], wins, n))
    assert bt.converged
    ratios = bt.strengths / bt.strengths[0]
    assert np.allclose(ratios, s, atol=1e-6)
    assert abs(bt.log_scores.sum()) < 1e-12


def test_bt_symmetric_and_chain():
    bt = bradley_terry_scores(PreferenceMatrix.from_counts(["a", "b"], [[0, 5], [5, 0]]))
    assert bt.strengths[0] == pytest.approx(bt.strengths[1])
    wins = np.array([[0, 8, 9], [2, 0, 7], [1, 3, 0]], float)
    bt = bradley_terry_scores(PreferenceMatrix.from_counts(["a", "b", "c"], wins))
    assert bt.log_scores[0] > bt.log_scores[1] > bt.log_scores[2]


def test_bt_zero_wins_flagged():
    wins = np.array([[0, 3, 3], [0, 0, 2], [0, 1, 0]], float).T
    bt = bradley_terry_scores(PreferenceMatrix.from_counts(["a", "b", "c"], wins))
    assert bt.zero_wins.tolist() == [True, False, False] and bt.strengths[0] == 0.0


def test_bt_disconnected():
    wins = np.zeros((4, 4))
    wins[0, 1] = wins[1, 0] = 1
    wins[2, 3] = wins[3, 2] = 1
    with pytest.raises(DisconnectedComparisonError) as err:
        bradley_terry_scores(PreferenceMatrix.from_counts(list("abcd"), wins))
    assert err.value.components == [["a", "b"], ["c", "d"]]


# --------------------------------------------------------------------------
# Files and the end-to-end analysis


def write_votes(path, records):
    lines = ["observer_id,image_id,stimulus_a,stimulus_b,outcome"]
    lines += [f"{r.observer},{r.image},{r.a},{r.b},{r.outcome}" for r in records]
    path.write_text("\n".join(lines) + "\n")
    return path


def g1_study(n_obs=8, images=("room", "office")):
    order = list(reversed(G1))  # GLAP best
    votes = []
    for o in range(n_obs):
        for img in images:
            votes += ranking_votes(order, f"o{o}", img)
    # one observer with cyclic answers on every image
    for img in images:
        for a, b in itertools.combinations(G1, 2):
            i, j = G1.index(a), G1.index(b)
            votes.append(rec(a, b, "A" if (j - i) % 2 else "B", "noisy", img))
    return votes


def test_read_votes_round_trip(tmp_path):
    votes = g1_study(2)
    assert read_votes(write_votes(tmp_path / "v.csv", votes)) == votes


def test_read_votes_errors(tmp_path):
    p = tmp_path / "v.csv"
    p.write_text("")
    with pytest.raises(VoteFileError, match="empty"):
        read_votes(p)
    p.write_text("observer_id,image_id,stimulus_a\n")
    with pytest.raises(VoteFileError, match="missing column"):
        read_votes(p)
    p.write_text("observer_id,image_id,stimulus_a,stimulus_b,outcome\no,i,A,B,A\no,i,A,C,maybe\no,i,B,B,A\n")
    with pytest.raises(VoteFileError) as err:
        read_votes(p)
    assert "line 3" in str(err.value) and "line 4" in str(err.value)
    p.write_text("observer_id,image_id,stimulus_a,stimulus_b,outcome\n")
    with pytest.raises(VoteFileError, match="no votes"):
        read_votes(p)


def test_outlier_excluded_end_to_end(tmp_path):
    votes = read_votes(write_votes(tmp_path / "v.csv", g1_study()))
    report = evaluate_votes(votes)
    assert report.outliers == ["noisy"]
    stimuli, p = report.probabilities["room"]
    i, j = stimuli.index("GLAP"), stimuli.index("GPP")
    # all kept observers agree, so the noisy votes must be gone
    assert p[i, j] == 1.0
    bt = report.scores["room"]
    assert bt.stimuli[int(np.argmax(bt.log_scores))] == "GLAP"
    paths = report.write(tmp_path / "out")
    obs = paths["observers"].read_text().splitlines()
    assert obs[0] == "observer_id,R_o,circular_triads,comparisons,outlier" and len(obs) == 10
    probs = paths["probabilities"].read_text().splitlines()
    assert len(probs) == 1 + 2 * 30
    assert len(paths["scores"].read_text().splitlines()) == 1 + 2 * 6


def test_evaluate_rejects_empty():
    with pytest.raises(ValueError):
        evaluate_votes([])
