import pytest

from graphflex import synth
from graphflex.bench import BenchRecord, records_to_csv, scaling_run
from graphflex.pipeline import LearnerSpec, PipelineConfig


def blob_gen(n):
    return synth.gen_blobs(n, classes=4, d=8, sep=8.0, seed=0).features


class TestScalingRun:
    def test_single_point_no_slope(self):
        cfg = PipelineConfig(vanilla=True, learner_final=LearnerSpec("knn", k=3), T=1)
        records, slope = scaling_run(blob_gen, [200], cfg, repeats=3)
        assert slope is None
        assert len(records) == 1 and records[0].n == 200

    def test_records_and_invariant(self):
        cfg = PipelineConfig(
            clust_method="kmeans", clust_k=4, T=2, r_split=0.5, seed=0,
            learner_coarse=LearnerSpec("knn", k=8), learner_final=LearnerSpec("knn", k=4),
        )
        records, slope = scaling_run(blob_gen, [120, 240], cfg, repeats=3)
        assert [r.n for r in records] == [120, 240]
        for r in records:
            parts = r.clust_ms + r.coar_ms + r.learn_ms
            assert r.total_ms >= parts - 1.0  # measurement slack
            assert r.peak_final_nodes <= r.n
        assert slope is not None

    def test_grid_must_increase(self):
        with pytest.raises(ValueError):
            scaling_run(blob_gen, [200, 100], PipelineConfig(), repeats=3)

    def test_vanilla_times_only_the_learner(self):
        cfg = PipelineConfig(vanilla=True, learner_final=LearnerSpec("knn", k=3))
        records, _ = scaling_run(blob_gen, [150], cfg, repeats=3)
        assert records[0].config == "vanilla"
        assert records[0].clust_ms == 0.0 and records[0].coar_ms == 0.0


def test_csv_shape():
    records = [BenchRecord("pipeline", 100, 1.0, 2.0, 3.0, 6.5, 42)]
    csv = records_to_csv(records, 1.234)
    lines = csv.strip().splitlines()
    assert lines[0] == "config,n,clust_ms,coar_ms,learn_ms,total_ms,slope"
    assert lines[1].startswith("pipeline,100,1.000,2.000,3.000,6.500,1.2340")
    assert records_to_csv(records, None).strip().splitlines()[1].endswith("6.500,")
