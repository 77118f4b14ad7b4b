"""Experiment runner -- builds every artifact of a run and the report tables.

Artifacts live under the run directory and are reused when present:

    data/{train,test}.advt -> models/<model>.ckpt -> stats/<model>__<distortions>.stats
                                                 -> attacks/<model>__<attack>__<mode>.advt
    reports/, histograms/, roc/, detections/  (outputs only)
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any

import numpy as np

from src.core.attack_builder import EmptyAttackSetError, build_attack_set
from src.core.detector import (
    FeatureSqueezingDetector,
    SignatureDetector,
    calibrate_threshold,
    compute_class_statistics,
)
from src.core.evaluation import (
    InsufficientSamplesError,
    auc,
    correct_indices,
    export_histogram,
    export_roc,
    pair_sets,
    roc_curve,
)
from src.core.network import Network
from src.core.report_writer import ReportWriter
from src.core.synthetic import generate_synthetic_dataset
from src.core.trainer import accuracy, adversarial_finetune, train
from src.models.attack_result import AttackMode, AttackSet
from src.models.config import ExperimentConfig
from src.models.dataset import LabeledDataset, Split
from src.models.detection import ClassStatistics
from src.models.distortion import DistortionSet
from src.models.evaluation import ScoredSet, TruthTag
from src.models.network import ModelConfig
from src.storage.artifacts import (
    load_attack_set,
    load_checkpoint,
    load_dataset,
    load_statistics,
    save_attack_set,
    save_checkpoint,
    save_dataset,
    save_statistics,
)
from src.utils.constants import (
    APP_VERSION,
    ATTACKS_DIRNAME,
    CHECKPOINT_SUFFIX,
    DATA_DIRNAME,
    DATASET_SUFFIX,
    DETECTIONS_DIRNAME,
    EVAL_REPORT_FILENAME,
    FULL_REPORT_FILENAME,
    HISTOGRAMS_DIRNAME,
    MODELS_DIRNAME,
    REPORT_TITLE,
    REPORTS_DIRNAME,
    ROC_DIRNAME,
    STATS_DIRNAME,
    STATS_SUFFIX,
    SUBSTITUTE_WIDTH_MULTIPLIER,
)
from src.utils.file_utils import artifact_slug
from src.utils.logger import get_logger

logger = get_logger("core.experiment")

VICTIM = "victim"
SUBSTITUTE = "substitute"
VICTIM_ADV = "victim_adv"
MODEL_NAMES = (VICTIM, SUBSTITUTE, VICTIM_ADV)
DETECTORS = ("ours", "fs")

# Callback type: (stage, completed, total)
ProgressCallback = Callable[[str, int, int], None]

ABLATION_SETS = {
    "median": "median:3",
    "bitdepth": "bitdepth:5",
    "grayscale": "grayscale",
    "2dist": "median:3,bitdepth:5",
    "3dist": "median:3,bitdepth:5,grayscale",
}


@dataclass(frozen=True)
class RunPaths:
    """Artifact locations inside one run directory."""

    root: Path

    def dataset(self, split: Split) -> Path:
        return self.root / DATA_DIRNAME / f"{split.value}{DATASET_SUFFIX}"

    def checkpoint(self, model: str) -> Path:
        return self.root / MODELS_DIRNAME / f"{model}{CHECKPOINT_SUFFIX}"

    def statistics(self, model: str, distortions: DistortionSet) -> Path:
        return self.root / STATS_DIRNAME / f"{artifact_slug(model, distortions.descriptor)}{STATS_SUFFIX}"

    def attack_set(self, model: str, attack: str, mode: AttackMode) -> Path:
        return self.root / ATTACKS_DIRNAME / f"{artifact_slug(model, attack, mode.value)}{DATASET_SUFFIX}"

    def detection(self, stem: str) -> Path:
        return self.root / DETECTIONS_DIRNAME / f"{stem}.json"

    def report(self, filename: str) -> Path:
        return self.root / REPORTS_DIRNAME / filename

    def histogram(self, stem: str) -> Path:
        return self.root / HISTOGRAMS_DIRNAME / f"{stem}.csv"

    def roc(self, stem: str) -> Path:
        return self.root / ROC_DIRNAME / f"{stem}.csv"


def mean_of_reports(reports: list[dict[str, Any]]) -> dict[str, Any]:
    """Average numeric leaves present in every report; other leaves come from the first."""
    merged: dict[str, Any] = {}
    for key, value in reports[0].items():
        values = [r[key] for r in reports if key in r]
        if len(values) != len(reports):
            continue
        if isinstance(value, dict) and all(isinstance(v, dict) for v in values):
            merged[key] = mean_of_reports(values)
        elif isinstance(value, (int, float)) and not isinstance(value, bool):
            merged[key] = float(np.mean(values))
        else:
            merged[key] = value
    return merged


class ExperimentRunner:
    """Builds, caches and evaluates every artifact of one seeded run."""

    def __init__(
        self,
        config: ExperimentConfig,
        root: Path | None = None,
        progress_callback: ProgressCallback | None = None,
    ) -> None:
        """Initialize the runner.

        Args:
            config: Fully resolved experiment configuration.
            root: Run directory; defaults to ``config.run_path``.
            progress_callback: Optional ``(stage, completed, total)`` callback
                invoked during training epochs and attack crafting.
        """
        self.config = config
        self.paths = RunPaths(root or config.run_path)
        self._progress = progress_callback
        self._datasets: dict[Split, LabeledDataset] = {}
        self._networks: dict[str, Network] = {}
        self._empty_attacks: dict[str, str] = {}

    @property
    def default_distortions(self) -> DistortionSet:
        return DistortionSet.parse(self.config.detection.distortions)

    def _report_progress(self, stage: str, completed: int, total: int) -> None:
        if self._progress:
            self._progress(stage, completed, total)

    # ------------------------------------------------------------------
    # datasets
    # ------------------------------------------------------------------

    def generate_datasets(self) -> tuple[LabeledDataset, LabeledDataset]:
        """Render both splits from the data seed and write them."""
        ds = self.config.dataset
        seed = self.config.seeds.data
        train_set = generate_synthetic_dataset(
            ds.n_classes, ds.train_per_class, ds.image_size, seed, Split.TRAIN
        )
        test_set = generate_synthetic_dataset(
            ds.n_classes, ds.test_per_class, ds.image_size, seed + 1, Split.TEST
        )
        for dataset in (train_set, test_set):
            save_dataset(self.paths.dataset(dataset.split), dataset)
            self._datasets[dataset.split] = dataset
        return train_set, test_set

    def dataset(self, split: Split) -> LabeledDataset:
        """Load a split, generating both when the data directory is empty."""
        if split not in self._datasets:
            path = self.paths.dataset(split)
            if path.exists():
                self._datasets[split] = load_dataset(path)
            else:
                logger.info("No %s split at %s, generating datasets", split.value, path)
                self.generate_datasets()
        return self._datasets[split]

    # ------------------------------------------------------------------
    # models
    # ------------------------------------------------------------------

    def _model_config(self, name: str) -> ModelConfig:
        train_set = self.dataset(Split.TRAIN)
        if name == SUBSTITUTE:
            return ModelConfig.reference(
                train_set.image_shape,
                train_set.n_classes,
                self.config.seeds.substitute,
                width_multiplier=SUBSTITUTE_WIDTH_MULTIPLIER,
            )
        return ModelConfig.reference(train_set.image_shape, train_set.n_classes, self.config.seeds.victim)

    def _epoch_progress(self, stage: str, epochs: int) -> Callable[[Any], None]:
        return lambda summary: self._report_progress(stage, summary.epoch + 1, epochs)

    def train_model(
        self,
        name: str,
        epochs: int | None = None,
        batch_size: int | None = None,
        learning_rate: float | None = None,
    ) -> Network:
        """Train ``victim`` or ``substitute`` from initialization and write the checkpoint."""
        if name not in (VICTIM, SUBSTITUTE):
            raise ValueError(f"train_model trains {VICTIM} or {SUBSTITUTE}, got {name!r}")
        cfg = self.config.training
        epochs = cfg.epochs if epochs is None else epochs
        logger.info("Training %s for %d epochs", name, epochs)
        network = train(
            Network.initialize(self._model_config(name)),
            self.dataset(Split.TRAIN),
            epochs=epochs,
            batch_size=batch_size or cfg.batch_size,
            learning_rate=learning_rate or cfg.learning_rate,
            seed=self.config.seeds.train,
            testset=self.dataset(Split.TEST),
            epoch_callback=self._epoch_progress(f"train {name}", epochs),
        )
        save_checkpoint(self.paths.checkpoint(name), network.to_checkpoint())
        self._networks[name] = network
        return network

    def adversarial_train(
        self, epochs: int | None = None, epsilon: float | None = None
    ) -> Network:
        """Fine-tune the victim with FGSM half-batches and write ``victim_adv``."""
        cfg = self.config.training
        epochs = cfg.adv_epochs if epochs is None else epochs
        epsilon = cfg.adv_epsilon if epsilon is None else epsilon
        logger.info("Adversarial fine-tuning for %d epochs at epsilon %.3f", epochs, epsilon)
        network = adversarial_finetune(
            self.network(VICTIM),
            self.dataset(Split.TRAIN),
            epochs=epochs,
            epsilon=epsilon,
            batch_size=cfg.batch_size,
            learning_rate=cfg.adv_learning_rate,
            seed=self.config.seeds.adv_train,
            testset=self.dataset(Split.TEST),
            epoch_callback=self._epoch_progress("adv-train", epochs),
        )
        save_checkpoint(self.paths.checkpoint(VICTIM_ADV), network.to_checkpoint())
        self._networks[VICTIM_ADV] = network
        return network

    def network(self, name: str) -> Network:
        """Load a model, training it first when its checkpoint is absent."""
        if name not in MODEL_NAMES:
            raise ValueError(f"Unknown model {name!r} (expected one of {', '.join(MODEL_NAMES)})")
        if name not in self._networks:
            path = self.paths.checkpoint(name)
            if path.exists():
                self._networks[name] = Network.from_checkpoint(load_checkpoint(path))
            elif name == VICTIM_ADV:
                return self.adversarial_train()
            else:
                return self.train_model(name)
        return self._networks[name]

    # ------------------------------------------------------------------
    # statistics and attack sets
    # ------------------------------------------------------------------

    def statistics(self, model: str, distortions: DistortionSet | None = None) -> ClassStatistics:
        """Load or build the class statistics of ``model`` for ``distortions``.

        Statistics built for an older checkpoint are rebuilt.
        """
        distortions = distortions or self.default_distortions
        network = self.network(model)
        path = self.paths.statistics(model, distortions)
        if path.exists():
            stats = load_statistics(path)
            if stats.model_fingerprint == network.fingerprint():
                return stats
            logger.warning("Statistics at %s are stale, rebuilding", path)
        stats = compute_class_statistics(
            network,
            self.dataset(Split.TRAIN),
            distortions,
            exclude_misclassified=self.config.detection.exclude_misclassified,
        )
        save_statistics(path, stats)
        return stats

    def build_attack(self, model: str, attack: str, mode: AttackMode, limit: int | None = None) -> AttackSet:
        """Craft an attack set against ``model`` and write it.

        Black-box sets are crafted on the substitute and judged on ``model``.

        Raises:
            EmptyAttackSetError: If nothing fooled the victim.
        """
        config = self.config.attack(attack)
        victim = self.network(model)
        crafting = self.network(SUBSTITUTE) if mode is AttackMode.BLACK_BOX else victim
        attack_set = build_attack_set(
            crafting,
            self.dataset(Split.TEST),
            config,
            victim,
            mode,
            max_samples=limit or self.config.max_attack_samples,
            max_workers=self.config.max_workers,
            progress_callback=lambda done, total: self._report_progress(
                f"{attack} ({mode.value})", done, total
            ),
        )
        save_attack_set(self.paths.attack_set(model, attack, mode), attack_set, victim.n_classes)
        return attack_set

    def attack_set(self, model: str, attack: str, mode: AttackMode) -> AttackSet:
        """Load or craft an attack set; sets judged on an older checkpoint are re-crafted."""
        path = self.paths.attack_set(model, attack, mode)
        if path.exists():
            attack_set = load_attack_set(path)
            if attack_set.victim_fingerprint == self.network(model).fingerprint():
                return attack_set
            logger.warning("Attack set at %s is stale, re-crafting", path)
        return self.build_attack(model, attack, mode)

    # ------------------------------------------------------------------
    # scoring
    # ------------------------------------------------------------------

    def _detectors(
        self, model: str, distortions: DistortionSet
    ) -> dict[str, SignatureDetector | FeatureSqueezingDetector]:
        network = self.network(model)
        return {
            "ours": SignatureDetector(network, self.statistics(model, distortions), distortions),
            "fs": FeatureSqueezingDetector(network, distortions),
        }

    def score_attack(
        self,
        model: str,
        attack_set: AttackSet,
        distortions: DistortionSet | None = None,
        seed: int | None = None,
    ) -> dict[str, ScoredSet]:
        """Pair ``attack_set`` with legitimate samples and score both with each detector."""
        distortions = distortions or self.default_distortions
        network = self.network(model)
        legit, adversarial = pair_sets(
            attack_set,
            self.dataset(Split.TEST),
            network,
            self.config.seeds.pairing if seed is None else seed,
        )
        scored = {}
        for name, detector in self._detectors(model, distortions).items():
            legit_scores, legit_pred = detector.score_batch(legit.images)
            adv_scores, adv_pred = detector.score_batch(adversarial)
            scored[name] = ScoredSet.from_scores(legit_scores, adv_scores, legit_pred, adv_pred)
        return scored

    def _auc_row(
        self,
        model: str,
        attack_set: AttackSet,
        distortions: DistortionSet | None = None,
        export_stem: str | None = None,
    ) -> dict[str, Any]:
        """AUC and median scores of both detectors; with ``export_stem`` the
        histogram and ROC CSVs are written too.
        """
        scored = self.score_attack(model, attack_set, distortions)
        row: dict[str, Any] = {"size": len(attack_set), "mean_l2": attack_set.mean_l2}
        for name, scored_set in scored.items():
            if export_stem is None:
                roc = roc_curve(scored_set)
            else:
                stem = f"{export_stem}__{name}"
                export_histogram(
                    scored_set, self.config.detection.histogram_bins, self.paths.histogram(stem)
                )
                roc = export_roc(scored_set, self.paths.roc(stem))
            row[name] = auc(roc)
            row[f"{name}_median_legitimate"] = float(
                np.median(scored_set.scores_for(TruthTag.LEGITIMATE))
            )
            row[f"{name}_median_adversarial"] = float(
                np.median(scored_set.scores_for(TruthTag.ADVERSARIAL))
            )
        return row

    # ------------------------------------------------------------------
    # report tables
    # ------------------------------------------------------------------

    def _try_attack(
        self, model: str, attack: str, mode: AttackMode, skipped: dict[str, str]
    ) -> AttackSet | None:
        key = artifact_slug(model, attack, mode.value)
        if key in self._empty_attacks:
            skipped[key] = self._empty_attacks[key]
            return None
        try:
            return self.attack_set(model, attack, mode)
        except EmptyAttackSetError as exc:
            self._empty_attacks[key] = skipped[key] = str(exc)
            return None

    def _try_auc_row(
        self,
        model: str,
        attack_set: AttackSet,
        skipped: dict[str, str],
        distortions: DistortionSet | None = None,
        export_stem: str | None = None,
    ) -> dict[str, Any] | None:
        try:
            return self._auc_row(model, attack_set, distortions, export_stem)
        except InsufficientSamplesError as exc:
            skipped[artifact_slug(model, attack_set.config.name, attack_set.mode.value)] = str(exc)
            return None

    def evaluate(self, model: str = VICTIM, attacks: list[str] | None = None) -> dict[str, Any]:
        """White-box AUC table for ``model`` plus histogram and ROC CSVs; writes ``eval.json``."""
        attacks = attacks or [a.name for a in self.config.attacks]
        skipped: dict[str, str] = {}
        rows: dict[str, Any] = {}
        for attack in attacks:
            attack_set = self._try_attack(model, attack, AttackMode.WHITE_BOX, skipped)
            if attack_set is None:
                continue
            stem = artifact_slug(model, attack, AttackMode.WHITE_BOX.value)
            row = self._try_auc_row(model, attack_set, skipped, export_stem=stem)
            if row is None:
                continue
            rows[attack] = row
            logger.info("AUC %s on %s: ours %.4f, FS %.4f", attack, model, row["ours"], row["fs"])

        report = self._envelope()
        report.update({"model": model, "auc": rows, "skipped": skipped})
        ReportWriter.write_json_report(self.paths.report(EVAL_REPORT_FILENAME), report)
        return report

    def _envelope(self) -> dict[str, Any]:
        return {
            "title": REPORT_TITLE,
            "version": APP_VERSION,
            "config": self.config.to_dict(),
            "seeds": asdict(self.config.seeds),
        }

    def accuracy_table(self, skipped: dict[str, str]) -> dict[str, Any]:
        """Victim (and substitute) accuracy and victim confidence on each set."""
        victim, substitute = self.network(VICTIM), self.network(SUBSTITUTE)
        test = self.dataset(Split.TEST)
        probs = victim.predict_batch(test.images)
        table: dict[str, Any] = {
            "legitimate": {
                "victim_accuracy": float(np.mean(probs.argmax(axis=1) == test.labels)),
                "victim_confidence": float(np.mean(probs.max(axis=1))),
                "substitute_accuracy": accuracy(substitute, test),
            }
        }
        for attack in self.config.attacks:
            for mode in (AttackMode.WHITE_BOX, AttackMode.BLACK_BOX):
                if mode is AttackMode.BLACK_BOX and attack.name not in self.config.black_box_attacks:
                    continue
                attack_set = self._try_attack(VICTIM, attack.name, mode, skipped)
                if attack_set is None:
                    continue
                row = attack_set.summary.to_dict()
                row["retained"] = len(attack_set)
                row["mean_l2"] = attack_set.mean_l2
                table[f"{attack.name}_{mode.value}"] = row
        return table

    def auc_table(self, skipped: dict[str, str]) -> dict[str, Any]:
        rows = {}
        for attack in self.config.attacks:
            attack_set = self._try_attack(VICTIM, attack.name, AttackMode.WHITE_BOX, skipped)
            if attack_set is None:
                continue
            row = self._try_auc_row(VICTIM, attack_set, skipped)
            if row is not None:
                rows[attack.name] = row
        return rows

    def adversarial_training_table(self, skipped: dict[str, str]) -> dict[str, Any]:
        """Accuracy and detector AUC before and after adversarial fine-tuning.

        Attack sets for the fine-tuned model are crafted against it.
        """
        test = self.dataset(Split.TEST)
        before, after = self.network(VICTIM), self.network(VICTIM_ADV)
        table: dict[str, Any] = {
            "clean_accuracy": {"before": accuracy(before, test), "after": accuracy(after, test)},
            "attacks": {},
        }
        for attack in self.config.adv_training_attacks:
            row: dict[str, Any] = {}
            for label, model in (("before", VICTIM), ("after", VICTIM_ADV)):
                attack_set = self._try_attack(model, attack, AttackMode.WHITE_BOX, skipped)
                if attack_set is None:
                    continue
                row[f"accuracy_{label}"] = attack_set.summary.victim_accuracy
                aucs = self._try_auc_row(model, attack_set, skipped)
                if aucs is None:
                    continue
                row[f"ours_{label}"] = aucs["ours"]
                row[f"fs_{label}"] = aucs["fs"]
            table["attacks"][attack] = row
        return table

    def ablation_table(self, skipped: dict[str, str]) -> dict[str, Any]:
        """AUC of both detectors for every distortion configuration."""
        table: dict[str, Any] = {}
        for attack in self.config.detection.ablation_attacks:
            attack_set = self._try_attack(VICTIM, attack, AttackMode.WHITE_BOX, skipped)
            if attack_set is None:
                continue
            table[attack] = {}
            for label, descriptor in ABLATION_SETS.items():
                aucs = self._try_auc_row(VICTIM, attack_set, skipped, DistortionSet.parse(descriptor))
                if aucs is not None:
                    table[attack][label] = {"ours": aucs["ours"], "fs": aucs["fs"]}
        return table

    def black_box_table(self, skipped: dict[str, str]) -> dict[str, Any]:
        """Detection rates on transferred attacks at thresholds calibrated on legitimate data.

        Correctly predicted test samples are split by the pairing seed into a
        calibration half and a held-out half; the held-out rejection rate
        checks the calibration.
        """
        victim = self.network(VICTIM)
        test = self.dataset(Split.TEST)
        rng = np.random.default_rng(self.config.seeds.pairing)
        candidates = rng.permutation(correct_indices(victim, test))
        half = len(candidates) // 2
        target = self.config.detection.target_fpr
        if half == 0:
            skipped["black_box"] = str(InsufficientSamplesError(2, len(candidates)))
            return {"target_fpr": target, "attacks": {}}
        calibration, held_out = test.subset(candidates[:half]), test.subset(candidates[half:])

        thresholds, rejection = {}, {}
        detectors = self._detectors(VICTIM, self.default_distortions)
        for name, detector in detectors.items():
            cal_scores, _ = detector.score_batch(calibration.images)
            thresholds[name] = calibrate_threshold(cal_scores, target)
            held_scores, _ = detector.score_batch(held_out.images)
            rejection[name] = float(np.mean(held_scores < thresholds[name]))

        attacks: dict[str, Any] = {}
        for attack in self.config.black_box_attacks:
            attack_set = self._try_attack(VICTIM, attack, AttackMode.BLACK_BOX, skipped)
            if attack_set is None:
                continue
            row: dict[str, Any] = {"size": len(attack_set)}
            for name, detector in detectors.items():
                adv_scores, _ = detector.score_batch(attack_set.images)
                row[name] = float(np.mean(adv_scores < thresholds[name]))
            attacks[attack] = row
        return {
            "target_fpr": target,
            "calibration_size": int(half),
            "held_out_size": int(len(candidates) - half),
            "thresholds": thresholds,
            "held_out_rejection": rejection,
            "attacks": attacks,
        }

    def tables(self) -> dict[str, Any]:
        """Every report table for this runner's seeds."""
        skipped: dict[str, str] = {}
        tables = {
            "accuracy": self.accuracy_table(skipped),
            "auc": self.auc_table(skipped),
            "adversarial_training": self.adversarial_training_table(skipped),
            "ablation": self.ablation_table(skipped),
            "black_box": self.black_box_table(skipped),
        }
        tables["skipped"] = skipped
        return tables

    def report(self) -> dict[str, Any]:
        """Run every table for each repeat and write ``report.json`` and a TXT summary.

        Repeat ``r`` offsets every seed by ``r`` and uses its own
        sub-directory when more than one repeat is configured.
        """
        repeats = max(1, self.config.repeats)
        if repeats == 1:
            per_repeat = [self.tables()]
        else:
            per_repeat = []
            for r in range(repeats):
                logger.info("Repeat %d/%d", r + 1, repeats)
                runner = ExperimentRunner(
                    self.config.with_seed_offset(r),
                    root=self.paths.root / f"repeat-{r}",
                    progress_callback=self._progress,
                )
                per_repeat.append(runner.tables())

        report = self._envelope()
        report.update(mean_of_reports(per_repeat))
        if repeats > 1:
            report["per_repeat"] = per_repeat
        ReportWriter.write_json_report(self.paths.report(FULL_REPORT_FILENAME), report)
        ReportWriter.write_text_report(self.paths.report(FULL_REPORT_FILENAME).with_suffix(".txt"), report)
        return report
