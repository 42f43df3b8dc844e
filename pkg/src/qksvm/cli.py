"""Command-line interface: configure experiments, run them, emit deterministic artifacts.

Commands: encode, gram, cv, grid-search, shot-sweep, table2, validate.
Configuration comes from an optional JSON file plus ``--dotted.key=value``
overrides; the fully resolved configuration is echoed next to every output.
Exit codes: 0 ok, 2 configuration, 3 ingestion, 4 convergence, 5 internal.
"""

from __future__ import annotations

import argparse
import dataclasses
import difflib
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    ConfigurationError,
    ConvergenceError,
    DegenerateDataError,
    DegenerateModelError,
    IngestionError,
    QksvmError,
)
from .feature_maps import FAMILIES, FeatureMapSpec, encode
from .kernels import (
    KERNEL_KINDS,
    KernelSpec,
    ProjectionStrategy,
    STRATEGY_MODES,
    check_psd,
    gram_matrix,
    gram_to_binary,
    gram_to_csv,
    project_state,
)
from .pipeline import (
    CvResult,
    Dataset,
    HyperParams,
    IOT_FEATURE_COLUMNS,
    apply_scaler,
    cross_validate,
    default_grids,
    fit_scaler,
    grid_search,
    load_dataset,
    shot_sweep,
)
from .validation import run_property_suite

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INGESTION = 3
EXIT_CONVERGENCE = 4
EXIT_INTERNAL = 5

DEFAULT_SHOT_COUNTS = [16, 32, 64, 128, 256, 512, 1024, 1500, 2048, 4096, 8192]


@dataclass
class DatasetConfig:
    path: str | None = None
    label_column: str = "occupancy"
    positive_label: object = None
    column_map: dict | None = None


@dataclass
class KernelConfig:
    kind: str = "PQK"
    shots: int | None = None
    shot_seed: int = 0


@dataclass
class FeatureMapConfig:
    family: str = "RotX"
    with_cnot_ring: bool = False
    reps: int | None = None
    evolution_time: float = math.pi / 2


@dataclass
class StrategyConfig:
    mode: str = "M1"


@dataclass
class HyperConfig:
    C: float = 1.0
    gamma: float = 0.1


@dataclass
class GridConfig:
    C: list | None = None
    gamma: list | None = None


@dataclass
class CvConfig:
    k: int = 10
    stratified: bool = True


@dataclass
class ScalingConfig:
    mode: str = "global"
    interval: list = field(default_factory=lambda: [0.0, math.pi])


@dataclass
class RunConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    kernel: KernelConfig = field(default_factory=KernelConfig)
    feature_map: FeatureMapConfig = field(default_factory=FeatureMapConfig)
    strategy: StrategyConfig = field(default_factory=StrategyConfig)
    hyperparams: HyperConfig = field(default_factory=HyperConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    cv: CvConfig = field(default_factory=CvConfig)
    scaling: ScalingConfig = field(default_factory=ScalingConfig)
    seed: int = 42
    shots_list: list = field(default_factory=lambda: list(DEFAULT_SHOT_COUNTS))
    output_dir: str = "results"
    jobs: int = 1


_SECTION_TYPES = {
    "dataset": DatasetConfig,
    "kernel": KernelConfig,
    "feature_map": FeatureMapConfig,
    "strategy": StrategyConfig,
    "hyperparams": HyperConfig,
    "grid": GridConfig,
    "cv": CvConfig,
    "scaling": ScalingConfig,
}


def _suggest(key: str, options) -> str:
    close = difflib.get_close_matches(key, list(options), n=1)
    return f" (did you mean {close[0]!r}?)" if close else ""


def _check_leaf(value, expected, path: str):
    kind, nullable = expected
    if value is None:
        if nullable:
            return None
        raise ConfigurationError(f"{path}: must not be null")
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigurationError(f"{path}: expected an integer, got {value!r}")
        return int(value)
    if kind == "number":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if kind == "str":
        if not isinstance(value, str):
            raise ConfigurationError(f"{path}: expected a string, got {value!r}")
        return value
    if kind == "bool":
        if not isinstance(value, bool):
            raise ConfigurationError(f"{path}: expected true/false, got {value!r}")
        return value
    if kind == "scalar":
        if not isinstance(value, (str, int, float, bool)):
            raise ConfigurationError(f"{path}: expected a scalar, got {value!r}")
        return value
    if kind == "number_list":
        if not isinstance(value, list) or not value:
            raise ConfigurationError(f"{path}: expected a non-empty list of numbers")
        out = []
        for i, item in enumerate(value):
            if isinstance(item, bool) or not isinstance(item, (int, float)):
                raise ConfigurationError(f"{path}[{i}]: expected a number, got {item!r}")
            out.append(float(item))
        return out
    if kind == "int_list":
        if not isinstance(value, list) or not value:
            raise ConfigurationError(f"{path}: expected a non-empty list of integers")
        out = []
        for i, item in enumerate(value):
            if isinstance(item, bool) or not isinstance(item, int):
                raise ConfigurationError(f"{path}[{i}]: expected an integer, got {item!r}")
            out.append(int(item))
        return out
    if kind == "str_map":
        if not isinstance(value, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in value.items()
        ):
            raise ConfigurationError(f"{path}: expected a string-to-string mapping")
        return dict(value)
    raise AssertionError(kind)


# field name -> (leaf kind, nullable)
_FIELD_KINDS = {
    ("dataset", "path"): ("str", True),
    ("dataset", "label_column"): ("str", False),
    ("dataset", "positive_label"): ("scalar", True),
    ("dataset", "column_map"): ("str_map", True),
    ("kernel", "kind"): ("str", False),
    ("kernel", "shots"): ("int", True),
    ("kernel", "shot_seed"): ("int", False),
    ("feature_map", "family"): ("str", False),
    ("feature_map", "with_cnot_ring"): ("bool", False),
    ("feature_map", "reps"): ("int", True),
    ("feature_map", "evolution_time"): ("number", False),
    ("strategy", "mode"): ("str", False),
    ("hyperparams", "C"): ("number", False),
    ("hyperparams", "gamma"): ("number", False),
    ("grid", "C"): ("number_list", True),
    ("grid", "gamma"): ("number_list", True),
    ("cv", "k"): ("int", False),
    ("cv", "stratified"): ("bool", False),
    ("scaling", "mode"): ("str", False),
    ("scaling", "interval"): ("number_list", False),
    (None, "seed"): ("int", False),
    (None, "shots_list"): ("int_list", False),
    (None, "output_dir"): ("str", False),
    (None, "jobs"): ("int", False),
}


def _apply_section(target, section: str, data: dict):
    names = {f.name for f in dataclasses.fields(target)}
    for key, value in data.items():
        if key not in names:
            raise ConfigurationError(
                f"unknown key {section + '.' + key!r}{_suggest(key, names)}"
            )
        setattr(target, key, _check_leaf(value, _FIELD_KINDS[(section, key)], f"{section}.{key}"))


def _apply_mapping(config: RunConfig, data: dict, source: str):
    top_names = {f.name for f in dataclasses.fields(RunConfig)}
    for key, value in data.items():
        if key not in top_names:
            raise ConfigurationError(
                f"unknown key {key!r} in {source}{_suggest(key, top_names)}"
            )
        if key in _SECTION_TYPES:
            if not isinstance(value, dict):
                raise ConfigurationError(f"{key}: expected an object")
            _apply_section(getattr(config, key), key, value)
        else:
            setattr(config, key, _check_leaf(value, _FIELD_KINDS[(None, key)], key))


def _nest_dotted(overrides: dict) -> dict:
    nested: dict = {}
    for dotted, value in overrides.items():
        parts = dotted.split(".")
        cursor = nested
        for part in parts[:-1]:
            cursor = cursor.setdefault(part, {})
            if not isinstance(cursor, dict):
                raise ConfigurationError(f"flag --{dotted} conflicts with an earlier flag")
        cursor[parts[-1]] = value
    return nested


def _validate_semantics(config: RunConfig):
    if config.kernel.kind not in KERNEL_KINDS:
        raise ConfigurationError(
            f"kernel.kind: unknown kind {config.kernel.kind!r}"
            f"{_suggest(config.kernel.kind, KERNEL_KINDS)}"
        )
    if config.feature_map.family not in FAMILIES:
        raise ConfigurationError(
            f"feature_map.family: unknown family {config.feature_map.family!r}"
            f"{_suggest(config.feature_map.family, FAMILIES)}"
        )
    if config.strategy.mode not in STRATEGY_MODES:
        raise ConfigurationError(
            f"strategy.mode: unknown mode {config.strategy.mode!r}"
            f"{_suggest(config.strategy.mode, STRATEGY_MODES)}"
        )
    if config.scaling.mode not in ("global", "fold"):
        raise ConfigurationError("scaling.mode: must be 'global' or 'fold'")
    if len(config.scaling.interval) != 2 or not config.scaling.interval[0] < config.scaling.interval[1]:
        raise ConfigurationError("scaling.interval: expected [lo, hi] with lo < hi")
    if config.hyperparams.C <= 0 or config.hyperparams.gamma <= 0:
        raise ConfigurationError("hyperparams: C and gamma must be positive")
    if config.cv.k < 2:
        raise ConfigurationError(f"cv.k: must be >= 2, got {config.cv.k}")
    if config.jobs < 1:
        raise ConfigurationError(f"jobs: must be >= 1, got {config.jobs}")
    if config.kernel.shots is not None and config.kernel.shots < 1:
        raise ConfigurationError(f"kernel.shots: must be >= 1, got {config.kernel.shots}")
    if sorted(config.shots_list) != config.shots_list or any(
        s < 1 for s in config.shots_list
    ):
        raise ConfigurationError("shots_list: must be ascending positive integers")
    for name, grid in (("grid.C", config.grid.C), ("grid.gamma", config.grid.gamma)):
        if grid is not None and any(g <= 0 for g in grid):
            raise ConfigurationError(f"{name}: entries must be positive")


def parse_config(config_path: str | None, overrides: dict) -> RunConfig:
    """Resolve file values plus flag overrides into a validated RunConfig."""
    config = RunConfig()
    if config_path is not None:
        try:
            with open(config_path, "r", encoding="utf-8") as stream:
                data = json.load(stream)
        except FileNotFoundError:
            raise ConfigurationError(f"config file not found: {config_path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigurationError("config file must contain a JSON object")
        _apply_mapping(config, data, str(config_path))
    if overrides:
        _apply_mapping(config, _nest_dotted(overrides), "flags")
    _validate_semantics(config)
    return config


def _parse_override_tokens(tokens) -> dict:
    aliases = {"dataset": "dataset.path", "out": "output_dir", "config": None}
    overrides = {}
    for token in tokens:
        if not token.startswith("--") or "=" not in token:
            raise ConfigurationError(
                f"unrecognized argument {token!r}; overrides look like --section.key=value"
            )
        dotted, raw = token[2:].split("=", 1)
        dotted = aliases.get(dotted, dotted) or dotted
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw  # bare strings need no quotes
        overrides[dotted] = value
    return overrides


# ---------------------------------------------------------------------------
# derived objects


def _require_dataset(config: RunConfig) -> Dataset:
    if config.dataset.path is None:
        raise ConfigurationError("dataset.path: required for this command")
    column_map = config.dataset.column_map
    if column_map is None:
        column_map = {name: name for name in IOT_FEATURE_COLUMNS}
    return load_dataset(
        config.dataset.path,
        column_map,
        config.dataset.label_column,
        config.dataset.positive_label,
    )


def _feature_map_spec(config: RunConfig, n_qubits: int) -> FeatureMapSpec:
    fm = config.feature_map
    return FeatureMapSpec(
        family=fm.family,
        n_qubits=n_qubits,
        with_cnot_ring=fm.with_cnot_ring,
        reps=fm.reps,
        evolution_time=fm.evolution_time,
    )


def _kernel_spec(config: RunConfig, n_qubits: int) -> KernelSpec:
    kind = config.kernel.kind
    if kind == "RBF":
        return KernelSpec("RBF", gamma=config.hyperparams.gamma)
    feature_map = _feature_map_spec(config, n_qubits)
    if kind == "FidelityQK":
        return KernelSpec("FidelityQK", feature_map=feature_map)
    return KernelSpec(
        "PQK",
        gamma=config.hyperparams.gamma,
        feature_map=feature_map,
        strategy=ProjectionStrategy(config.strategy.mode, n_qubits),
        shots=config.kernel.shots,
        shot_seed=config.kernel.shot_seed,
    )


def _scaled_features(config: RunConfig, dataset: Dataset) -> np.ndarray:
    interval = (config.scaling.interval[0], config.scaling.interval[1])
    return apply_scaler(fit_scaler(dataset.features, interval), dataset.features)


# ---------------------------------------------------------------------------
# output plumbing


def _config_as_dict(config: RunConfig) -> dict:
    return dataclasses.asdict(config)


def _config_hash(config: RunConfig) -> str:
    canonical = json.dumps(_config_as_dict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("ascii")).hexdigest()


def _write_json(path: Path, payload: dict):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="ascii")


def _echo_config(config: RunConfig, out_dir: Path):
    _write_json(
        out_dir / "config_resolved.json",
        {
            "version": __version__,
            "config_hash": _config_hash(config),
            "seed": config.seed,
            "resolved": _config_as_dict(config),
        },
    )


def _spec_row_fields(spec: KernelSpec) -> dict:
    if spec.kind == "RBF":
        return {"kernel": "RBF", "feature_map": None, "strategy": None}
    fm = spec.feature_map
    name = fm.family + ("+ring" if fm.with_cnot_ring else "")
    strategy = spec.strategy.mode if spec.kind == "PQK" else None
    return {"kernel": spec.kind, "feature_map": name, "strategy": strategy}


def _result_row(spec: KernelSpec, result: CvResult) -> dict:
    row = _spec_row_fields(spec)
    row.update(
        {
            "C": result.hyperparams.C,
            "gamma": result.hyperparams.gamma,
            "fold_accuracies": list(result.fold_accuracies),
            "mean": result.mean,
            "ci95_half_width": result.ci_half_width,
        }
    )
    if result.shots is not None:
        row["shots"] = result.shots
    return row


def _results_payload(config: RunConfig, experiment: str, rows: list, extra: dict | None = None):
    payload = {
        "experiment": experiment,
        "version": __version__,
        "config_hash": _config_hash(config),
        "seed": config.seed,
        "rows": rows,
    }
    if extra:
        payload.update(extra)
    return payload


def _cv_kwargs(config: RunConfig) -> dict:
    return {
        "scaling": config.scaling.mode,
        "interval": (config.scaling.interval[0], config.scaling.interval[1]),
        "stratified": config.cv.stratified,
        "jobs": config.jobs,
    }


# ---------------------------------------------------------------------------
# commands


def _cmd_encode(config: RunConfig, out_dir: Path) -> int:
    dataset = _require_dataset(config)
    scaled = _scaled_features(config, dataset)
    feature_map = _feature_map_spec(config, dataset.n_features)
    strategy = ProjectionStrategy(config.strategy.mode, dataset.n_features)
    shots = config.kernel.shots
    labels = [
        "q" + "q".join(str(q) for q in subset) + ":" + letters
        for subset, letters in strategy.observables()
    ]
    with open(out_dir / "projected_features.csv", "w", encoding="ascii") as stream:
        stream.write(",".join(labels) + "\n")
        for index, row in enumerate(scaled):
            state = encode(feature_map, row)
            shot_arg = (shots, config.kernel.shot_seed ^ index) if shots else None
            features = project_state(state, strategy, shots=shot_arg)
            stream.write(",".join(format(v, ".17g") for v in features) + "\n")
    print(f"wrote {dataset.n_points} projected rows ({strategy.n_features} features each)")
    return EXIT_OK


def _cmd_gram(config: RunConfig, out_dir: Path) -> int:
    dataset = _require_dataset(config)
    scaled = _scaled_features(config, dataset)
    spec = _kernel_spec(config, dataset.n_features)
    gram = gram_matrix(scaled, spec)
    report = check_psd(gram)
    gram_to_csv(gram, out_dir / "gram.csv")
    gram_to_binary(gram, out_dir / "gram.bin")
    _write_json(
        out_dir / "gram_meta.json",
        {
            "version": __version__,
            "config_hash": _config_hash(config),
            "seed": config.seed,
            "kernel": spec.describe(),
            "size": gram.size,
            "min_eigenvalue": report.min_eigenvalue,
            "psd_pass": report.passed,
            "psd_tol": report.tol,
        },
    )
    print(f"gram size {gram.size}, min eigenvalue {report.min_eigenvalue:.6e}")
    return EXIT_OK


def _cmd_cv(config: RunConfig, out_dir: Path) -> int:
    dataset = _require_dataset(config)
    spec = _kernel_spec(config, dataset.n_features)
    hp = HyperParams(config.hyperparams.C, config.hyperparams.gamma)
    result = cross_validate(
        dataset, spec, hp, config.cv.k, config.seed, **_cv_kwargs(config)
    )
    _write_json(
        out_dir / "results.json",
        _results_payload(config, "cv", [_result_row(spec, result)]),
    )
    print(f"{spec.describe()}: {result.mean:.4f} +- {result.ci_half_width:.4f}")
    return EXIT_OK


def _grids(config: RunConfig, spec: KernelSpec) -> tuple[list, list]:
    default_c, default_gamma = default_grids(spec)
    c_grid = config.grid.C if config.grid.C is not None else default_c
    gamma_grid = config.grid.gamma if config.grid.gamma is not None else default_gamma
    return c_grid, gamma_grid


def _cmd_grid_search(config: RunConfig, out_dir: Path) -> int:
    dataset = _require_dataset(config)
    spec = _kernel_spec(config, dataset.n_features)
    c_grid, gamma_grid = _grids(config, spec)
    best, table = grid_search(
        dataset, spec, c_grid, gamma_grid, config.cv.k, config.seed, **_cv_kwargs(config)
    )
    best_result = next(r for r in table if r.hyperparams == best)
    _write_json(
        out_dir / "results.json",
        _results_payload(
            config,
            "grid-search",
            [_result_row(spec, r) for r in table],
            extra={"best": _result_row(spec, best_result)},
        ),
    )
    print(
        f"best {spec.describe()}: C={best.C}, gamma={best.gamma}, "
        f"accuracy {best_result.mean:.4f} +- {best_result.ci_half_width:.4f}"
    )
    return EXIT_OK


def _cmd_shot_sweep(config: RunConfig, out_dir: Path) -> int:
    dataset = _require_dataset(config)
    spec = _kernel_spec(config, dataset.n_features)
    hp = HyperParams(config.hyperparams.C, config.hyperparams.gamma)
    results = shot_sweep(
        dataset,
        spec,
        hp,
        config.shots_list,
        config.cv.k,
        config.seed,
        **_cv_kwargs(config),
    )
    rows = [_result_row(spec, r) for r in results]
    _write_json(out_dir / "results.json", _results_payload(config, "shot-sweep", rows))
    with open(out_dir / "shot_sweep.csv", "w", encoding="ascii") as stream:
        stream.write("shots,mean_accuracy,ci_half_width\n")
        for result in results:
            stream.write(
                f"{result.shots},{result.mean:.17g},{result.ci_half_width:.17g}\n"
            )
    for result in results:
        print(f"shots={result.shots}: {result.mean:.4f} +- {result.ci_half_width:.4f}")
    return EXIT_OK


def _table2_specs(n_qubits: int) -> list[KernelSpec]:
    maps = [
        ("RotX", False),
        ("ThreeD", True),
        ("ThreeD", False),
        ("ZZ", False),
        ("IQP", False),
        ("Trotterized", False),
    ]
    specs: list[KernelSpec] = []
    for mode in STRATEGY_MODES:
        for family, ring in maps:
            specs.append(
                KernelSpec(
                    "PQK",
                    gamma=1.0,
                    feature_map=FeatureMapSpec(family, n_qubits, with_cnot_ring=ring),
                    strategy=ProjectionStrategy(mode, n_qubits),
                )
            )
    for family, ring in maps:
        specs.append(
            KernelSpec(
                "FidelityQK",
                feature_map=FeatureMapSpec(family, n_qubits, with_cnot_ring=ring),
            )
        )
    specs.append(KernelSpec("RBF", gamma=1.0))
    return specs


def _cmd_table2(config: RunConfig, out_dir: Path) -> int:
    dataset = _require_dataset(config)
    rows = []
    for spec in _table2_specs(dataset.n_features):
        c_grid, gamma_grid = _grids(config, spec)
        best, table = grid_search(
            dataset, spec, c_grid, gamma_grid, config.cv.k, config.seed, **_cv_kwargs(config)
        )
        best_result = next(r for r in table if r.hyperparams == best)
        row = _result_row(spec, best_result)
        rows.append(row)
        label = row["feature_map"] or "-"
        strategy = row["strategy"] or "-"
        print(
            f"{row['kernel']:<11} {label:<12} {strategy:<6} "
            f"{row['mean']:.4f} +- {row['ci95_half_width']:.4f} "
            f"(C={row['C']}, gamma={row['gamma']})"
        )
    _write_json(out_dir / "results.json", _results_payload(config, "table2", rows))
    return EXIT_OK


def _cmd_validate(config: RunConfig, out_dir: Path) -> int:
    report = run_property_suite(config.seed)
    payload = {
        "version": __version__,
        "config_hash": _config_hash(config),
        "seed": config.seed,
        "passed": report["passed"],
        "checks": report["checks"],
    }
    _write_json(out_dir / "validation.json", payload)
    for item in report["checks"]:
        print(("PASS" if item["passed"] else "FAIL"), item["name"], "--", item["detail"])
    return EXIT_OK if report["passed"] else EXIT_INTERNAL


_COMMANDS = {
    "encode": _cmd_encode,
    "gram": _cmd_gram,
    "cv": _cmd_cv,
    "grid-search": _cmd_grid_search,
    "shot-sweep": _cmd_shot_sweep,
    "table2": _cmd_table2,
    "validate": _cmd_validate,
}


def run_command(command: str, config: RunConfig) -> int:
    """Dispatch one validated command; writes artifacts under config.output_dir."""
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _echo_config(config, out_dir)
    return _COMMANDS[command](config, out_dir)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="qksvm",
        description="Kernel-SVM experiments with simulated quantum feature maps.",
        epilog=(
            "Any --section.key=value flag overrides the config file, e.g. "
            "--kernel.kind=RBF --hyperparams.gamma=0.1 --seed=7. "
            "--dataset=PATH and --out=DIR are shorthands."
        ),
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", default=None, help="JSON config file")
    args, rest = parser.parse_known_args(argv)
    try:
        overrides = _parse_override_tokens(rest)
        config = parse_config(args.config, overrides)
        return run_command(args.command, config)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IngestionError, DegenerateDataError) as exc:
        print(f"ingestion error: {exc}", file=sys.stderr)
        return EXIT_INGESTION
    except (ConvergenceError, DegenerateModelError) as exc:
        print(f"convergence error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except QksvmError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
