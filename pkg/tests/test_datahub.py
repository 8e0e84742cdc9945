import json

import numpy as np
import pandas as pd
import pytest

from fedmia.datahub import (
    ClientSignature,
    CorpusSpec,
    SynthSpec,
    WindowedDataset,
    build_scenario,
    generate_synthetic,
    load_corpus,
    load_corpus_container,
    save_corpus,
    shipped_corpus_spec,
    shipped_corpus_specs,
    split,
    window_segment,
    window_starts,
)
from fedmia.exceptions import ConfigurationError, DataError, IngestionError


def brute_force_windows(n_samples, window_len, stride):
    starts, s = [], 0
    while s + window_len <= n_samples:
        starts.append(s)
        s += stride
    return starts


@pytest.mark.parametrize("n,T,stride", [(256, 128, 64), (127, 128, 64), (128, 128, 64), (1000, 50, 7), (40, 8, 1)])
def test_window_count_formula(n, T, stride):
    expected = brute_force_windows(n, T, stride)
    assert list(window_starts(n, T, stride)) == expected
    assert len(expected) == (max(0, (n - T) // stride + 1) if n >= T else 0)


def test_256_samples_give_three_windows():
    values = np.zeros((256, 3))
    w, lab = window_segment(values, np.zeros(256, dtype=int), 128, 64)
    assert w.shape == (3, 3, 128)
    assert list(lab) == [0, 0, 0]


def test_majority_labelling_drops_impure_windows():
    labels = np.array([0] * 5 + [1] * 3 + [2] * 2 + [2] * 6)
    values = np.arange(16, dtype=float)[:, None]
    w, lab = window_segment(values, labels, 8, 4)
    # windows: [0..8) majority 0 (5/8); [4..12) 1:3 0:1 2:4 -> 2 has 4/8 kept; [8..16) all 2
    assert list(lab) == [0, 2, 2]
    assert np.array_equal(w[0, 0], np.arange(8))


def _write_toy_csv(path, subjects=("s1", "s2"), activities=("walk", "sit"), n_per=64, delimiter=","):
    rows = []
    rng = np.random.default_rng(0)
    for subj in subjects:
        for act in activities:
            for t in range(n_per):
                rows.append((t, subj, act, *rng.normal(size=3)))
    df = pd.DataFrame(rows, columns=["ts", "subject", "activity", "x", "y", "z"])
    df.to_csv(path, index=False, sep=delimiter)
    return df


def toy_spec(**kw):
    base = dict(
        name="toy",
        channels=("x", "y", "z"),
        label_column="activity",
        subject_column="subject",
        label_map={"walk": 0, "sit": 1},
        window_len=16,
        overlap=0.5,
    )
    base.update(kw)
    return CorpusSpec(**base)


def test_toy_csv_provenance_matches_subject_column(tmp_path):
    path = tmp_path / "toy.csv"
    _write_toy_csv(path)
    clients = load_corpus(toy_spec(normalization="none"), path)
    assert sorted(clients) == [0, 1]
    # each subject: two segments? no - one contiguous run of 128 rows with a label change
    for cid, ds in clients.items():
        assert set(ds.provenance) == {cid}
        assert set(ds.labels) == {0, 1}
        assert len(ds) == (128 - 16) // 8 + 1
    ids = np.concatenate([ds.ids for ds in clients.values()])
    assert len(np.unique(ids)) == len(ids)


def test_unknown_label_lists_offending_value(tmp_path):
    path = tmp_path / "toy.csv"
    _write_toy_csv(path, activities=("walk", "jump"))
    with pytest.raises(IngestionError, match="jump"):
        load_corpus(toy_spec(), path)


def test_ignored_labels_and_excluded_subjects(tmp_path):
    path = tmp_path / "toy.csv"
    _write_toy_csv(path, subjects=("1", "2", "9"), activities=("walk", "null", "sit"))
    spec = toy_spec(ignore_labels=("null",), exclude_subjects=("9",), normalization="none")
    clients = load_corpus(spec, path)
    assert len(clients) == 2
    # walk and sit runs are separate 64-row segments: 7 windows each
    assert all(len(ds) == 2 * ((64 - 16) // 8 + 1) for ds in clients.values())


def test_subject_from_file_stem_and_headerless(tmp_path):
    for name in ("S01", "S02"):
        rng = np.random.default_rng(1)
        data = np.column_stack([rng.normal(size=(40, 2)), np.repeat([3, 4], 20)])
        np.savetxt(tmp_path / f"{name}.txt", data, delimiter=";", fmt="%.6f")
    spec = CorpusSpec(
        name="stem",
        channels=("a", "b"),
        label_column="label",
        label_map={"3": 0, "4": 1},
        delimiter=";",
        has_header=False,
        column_names=("a", "b", "label"),
        file_glob="*.txt",
        window_len=8,
        overlap=0.0,
    )
    clients = load_corpus(spec, tmp_path)
    assert len(clients) == 2
    assert all(len(ds) == 5 for ds in clients.values())


def test_constant_channel_normalises_to_zero(tmp_path):
    path = tmp_path / "toy.csv"
    df = _write_toy_csv(path)
    df["y"] = 0.1
    df.to_csv(path, index=False)
    clients = load_corpus(toy_spec(), path)
    for ds in clients.values():
        assert np.all(ds.windows[:, 1] == 0.0)


def test_normalisation_uses_only_own_training_split(tmp_path):
    path = tmp_path / "toy.csv"
    df = _write_toy_csv(path, n_per=200)
    df.loc[df.subject == "s2", "x"] += 100.0  # other subject must not influence s1
    df.to_csv(path, index=False)
    spec = toy_spec()
    raw = load_corpus(toy_spec(normalization="none"), path)
    normed = load_corpus(spec, path)
    for cid in raw:
        train, _ = split(raw[cid], spec.train_fraction, spec.split_seed)
        mean = train.windows.mean(axis=(0, 2), keepdims=True)
        std = train.windows.std(axis=(0, 2), keepdims=True)
        np.testing.assert_allclose(normed[cid].windows, (raw[cid].windows - mean) / std, atol=1e-12)


def test_corpus_spec_validation():
    with pytest.raises(ConfigurationError):
        toy_spec(window_len=4)
    with pytest.raises(ConfigurationError):
        toy_spec(overlap=1.0)


def test_shipped_specs_load():
    names = shipped_corpus_specs()
    assert {"uci_har", "wisdm", "har70plus", "harth", "pamap2"} <= set(names)
    for name in names:
        spec = shipped_corpus_spec(name)
        assert spec.classes >= 2
    assert "subject109" in shipped_corpus_spec("pamap2").exclude_subjects


def _dataset(n=100, classes=4, seed=0):
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(classes), n // classes)
    return WindowedDataset.from_arrays(rng.normal(size=(n, 2, 8)), labels)


def test_split_sizes_determinism_and_disjointness():
    ds = _dataset()
    tr, te = split(ds, 0.8, seed=1)
    assert (len(tr), len(te)) == (80, 20)
    assert not set(tr.ids) & set(te.ids)
    tr2, _ = split(ds, 0.8, seed=1)
    assert np.array_equal(tr.ids, tr2.ids)
    with pytest.raises(DataError):
        split(ds.subset(np.arange(0)), 0.8)


def test_split_is_stratified():
    rng = np.random.default_rng(3)
    labels = rng.choice(5, size=137, p=[0.4, 0.3, 0.15, 0.1, 0.05])
    ds = WindowedDataset.from_arrays(rng.normal(size=(137, 1, 8)), labels)
    tr, _ = split(ds, 0.7, seed=0)
    for c in range(5):
        overall = np.sum(labels == c) * len(tr) / len(ds)
        assert abs(np.sum(tr.labels == c) - overall) <= 1


def test_container_round_trip(tmp_path):
    clients = generate_synthetic(SynthSpec(n_clients=3, windows_per_class=4, window_len=16))
    path = tmp_path / "corpus.npz"
    save_corpus(clients, path)
    back = load_corpus_container(path)
    for cid in clients:
        for name in ("windows", "labels", "provenance", "ids"):
            assert getattr(back[cid], name).tobytes() == getattr(clients[cid], name).tobytes()


def test_synthetic_is_deterministic():
    spec = SynthSpec(n_clients=3, windows_per_class=5)
    a, b = generate_synthetic(spec), generate_synthetic(spec)
    for cid in a:
        assert a[cid].windows.tobytes() == b[cid].windows.tobytes()


def test_iid_clients_share_statistics():
    clients = generate_synthetic(SynthSpec(n_clients=4, heterogeneous=False, windows_per_class=200))
    means = np.array([[ds.windows[ds.labels == c].mean() for c in range(6)] for ds in clients.values()])
    rms = np.array([np.sqrt(np.mean(ds.windows**2)) for ds in clients.values()])
    assert np.ptp(means, axis=0).max() < 0.05
    assert np.ptp(rms) / rms.mean() < 0.03


def test_heterogeneous_rms_follows_amplitude_scale():
    sigs = [ClientSignature(amplitude=a, noise=0.0) for a in (0.5, 1.0, 2.0)]
    clients = generate_synthetic(SynthSpec(n_clients=3, windows_per_class=200, signatures=sigs))
    rms = np.array([np.sqrt(np.mean(ds.windows**2)) for ds in clients.values()])
    np.testing.assert_allclose(rms / rms[1], [0.5, 1.0, 2.0], rtol=0.03)


def test_scenario_k2_and_k3():
    clients = generate_synthetic(SynthSpec(n_clients=5, windows_per_class=40))
    for k in (2, 3):
        sc = build_scenario(clients, 1, k, n_member=60, n_nonmember=60, seed=k)
        assert len(sc.others) == k - 1 and 1 not in sc.others
        assert set(sc.member_pool.provenance) == {1}
        assert set(sc.nonmember_pool.provenance) == set(sc.others)
        assert set(sc.mix.provenance) == {-1}
        assert len(sc.mix) == 120 and sc.n_mix_members == 60
        pools = set(sc.member_pool.ids) | set(sc.nonmember_pool.ids)
        assert not pools & set(sc.mix.ids)
        # mix non-members come from the same k-1 clients
        owners = {int(i) // 240 for i in sc.mix.ids}
        assert owners == {1, *sc.others}


def test_scenario_reports_shortfall():
    clients = generate_synthetic(SynthSpec(n_clients=3, windows_per_class=10))
    with pytest.raises(DataError, match="need 400"):
        build_scenario(clients, 0, 2)
    with pytest.raises(ConfigurationError):
        build_scenario(clients, 0, 1)


def test_uci_har_converter_rebuilds_stream(tmp_path):
    from fedmia.datahub import uci_har_to_csv

    root = tmp_path / "UCI HAR Dataset"
    stream = np.arange(5 * 4 + 4, dtype=float)  # 5 overlapping windows of 8, hop 4
    for part, subj in (("train", 1), ("test", 2)):
        sig = root / part / "Inertial Signals"
        sig.mkdir(parents=True)
        rows = np.stack([stream[i * 4 : i * 4 + 8] for i in range(5)])
        for k, axis in enumerate("xyz"):
            np.savetxt(sig / f"total_acc_{axis}_{part}.txt", rows + 100 * k)
        np.savetxt(root / part / f"subject_{part}.txt", np.full(5, subj), fmt="%d")
        np.savetxt(root / part / f"y_{part}.txt", [1, 1, 1, 2, 2], fmt="%d")
    out = uci_har_to_csv(root, tmp_path / "uci_har.csv", window_len=8)
    df = pd.read_csv(out)
    assert len(df) == 2 * 5 * 4
    s1 = df[df.subject == 1]
    np.testing.assert_array_equal(s1.acc_x, stream[:20])
    np.testing.assert_array_equal(s1.acc_z, stream[:20] + 200)
    assert list(s1.activity) == [1] * 12 + [2] * 8
