import logging
from pathlib import Path

import fire

from .app import APPENDIX_AUC
from .benchmark import RunConfig, load_manifest, run_benchmark
from .clustermap import two_cluster_cut
from .datamodel import AucMatrix
from .registry import ALGORITHMS
from .report import emit_report, write_clustermap, write_stats
from .synthgen import ARCHETYPES, ArchetypeSpec, generate_archetype, write_archetype
from .utils import dump_json, format_doc_string, write_json

logger = logging.getLogger(__name__)


def _matrix(auc, fixture):
    if fixture:
        return AucMatrix.read(APPENDIX_AUC)
    if auc is None:
        raise ValueError("pass --auc <auc_matrix.csv> or --fixture")
    return AucMatrix.read(auc)


class CLI:
    def __init__(self, /, verbose=False):
        """
        :param verbose: log debug details, not only progress
        """
        logging.basicConfig(
            level=logging.DEBUG if verbose else logging.INFO,
            format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        )

    @format_doc_string(algorithms=", ".join(ALGORITHMS))
    def run(
        self,
        manifest: str = None,
        out: str = None,
        config: str = None,
        dotenv: str = None,
        algorithms: str = None,
        seed: int = None,
        threads: int = None,
        repeats: int = None,
        apply_diagnostics: bool = None,
        keep_going: bool = None,
        format: str = "csv",
    ):
        """
        run every selected detector over its grid on every manifest dataset

        :param manifest: path to the dataset manifest (json, jsonnet or yaml)
        :param out: results directory
        :param config: optional run configuration file with the same keys
        :param dotenv: path to .env file
        :param algorithms: comma separated selection from {algorithms}, all by
        default
        :param seed: master seed, an unsigned 64-bit integer
        :param threads: worker count, defaults to ODBENCH_THREADS or the cpu count
        :param repeats: runs averaged per grid point of a randomized detector
        :param apply_diagnostics: invert or exclude datasets by their AUC column
        :param keep_going: record failures as gaps and exit 0
        :param format: csv, or svg to draw the boxplots and clustermap too
        """
        cfg = RunConfig.resolve(
            config,
            dotenv,
            manifest=manifest,
            out=out,
            algorithms=algorithms,
            seed=seed,
            threads=threads,
            repeats=repeats,
            apply_diagnostics=apply_diagnostics,
            keep_going=keep_going,
        )
        result = run_benchmark(cfg)
        if result.auc.datasets:
            emit_report(cfg.out, format)
        if not result.complete and not cfg.keep_going:
            for gap in result.gaps:
                logger.error("gap: %s", gap)
            raise SystemExit(1)

    def stats(
        self,
        auc: str = None,
        out: str = "./stats",
        subset: str = None,
        fixture: bool = False,
    ):
        """
        Friedman ranks, Iman-Davenport test, Nemenyi p-values and the
        significance table

        :param auc: path to an auc_matrix.csv
        :param out: directory for the statistics files
        :param subset: local or global, restrict to that dataset cluster
        :param fixture: use the bundled appendix AUC table instead of --auc
        """
        table, _ = write_stats(_matrix(auc, fixture), Path(out), subset)
        return table.to_text()

    def clustermap(
        self,
        auc: str = None,
        out: str = "./clustermap",
        format: str = "svg",
        fixture: bool = False,
    ):
        """
        cluster algorithms and datasets by the pearson distance of their AUCs

        :param auc: path to an auc_matrix.csv
        :param out: directory for the dendrograms and the heatmap
        :param format: svg draws the heatmap, csv only writes the dendrograms
        :param fixture: use the bundled appendix AUC table instead of --auc
        """
        cmap = write_clustermap(_matrix(auc, fixture), Path(out), format == "svg")
        clusters = two_cluster_cut(cmap.datasets)
        return dump_json({"dataset_clusters": [sorted(c) for c in clusters]})

    @format_doc_string(archetypes=", ".join(ARCHETYPES))
    def synth(
        self,
        archetype: str,
        out: str = "./synthetic",
        n: int = 1000,
        d: int = 2,
        contamination: float = 0.05,
        seed: int = 0,
        count: int = 1,
    ):
        """
        generate labeled datasets of one anomaly archetype plus a manifest

        :param archetype: one of {archetypes}
        :param out: output directory
        :param n: samples per dataset
        :param d: variables per dataset
        :param contamination: fraction of anomalies
        :param seed: seed of the first dataset, the others count up from it
        :param count: number of datasets
        """
        out = Path(out)
        entries = []
        for i in range(count):
            spec = ArchetypeSpec(archetype, n, d, contamination, seed + i)
            dataset = generate_archetype(spec)
            path = write_archetype(dataset, out)
            entries.append({"name": dataset.name, "path": path.name})
        write_json(out / "manifest.json", entries)
        return str(out / "manifest.json")

    def report(self, results: str = "./results", format: str = "csv"):
        """
        percent-of-max boxplot data and the significance table of a run

        :param results: results directory of a finished run
        :param format: csv, or svg to draw the boxplots and clustermap too
        """
        return "\n".join(str(p) for p in emit_report(Path(results), format))

    def validate(self, manifest: str, dotenv: str = None):
        """
        ingest and preprocess every manifest entry and print its summary

        :param manifest: path to the dataset manifest
        :param dotenv: path to .env file
        """
        errors = []
        datasets = load_manifest(manifest, None, dotenv, True, errors)
        print(dump_json([d.summary() for d in datasets]), end="")
        if errors:
            print(dump_json(errors), end="")
            raise SystemExit(1)


def main():
    fire.Fire(CLI)


if __name__ == "__main__":
    main()
