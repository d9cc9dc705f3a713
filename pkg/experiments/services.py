from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from io import StringIO
from pathlib import Path
from typing import Any, Callable, Mapping, Optional, TextIO, Union

import numpy as np
from django.conf import settings
from django.db import DatabaseError

from arithmetic.services import sum_reciprocal_primes, totient
from characters.services import Character, select_characters, verify_orthogonality, write_character_table
from core.exceptions import ConfigError, LargeSieveError
from euler.grids import dyadic_grid, t_spacing
from euler.services import (
    CoefficientVector,
    SumSpec,
    abel_reduction_check,
    lemma_sup_scan,
    read_coefficient_file,
    write_scan_profile,
)
from experiments.models import ExperimentLogEvent, ExperimentRun
from experiments.serializers import (
    COEFFICIENT_SELECTORS,
    AbelReportSerializer,
    CharacterSerializer,
    ConstantEstimateSerializer,
    DualityReportSerializer,
    ExperimentConfigSerializer,
    ExtremalReportSerializer,
    LemmaScanReportSerializer,
    SelftestReportSerializer,
    VerificationReportSerializer,
)
from sieve.services import (
    build_delta,
    default_c1,
    duality_check,
    duality_selftest,
    extremal_ratio,
    scan_cross_constant,
    variant_re_bound,
    verify_theorem,
)

logger = logging.getLogger(__name__)

EXIT_PASSED = 0
EXIT_VIOLATED = 1
EXIT_CONFIG = 2

# Config-file and flag spellings mapped onto ExperimentConfig field names.
KEY_ALIASES = {
    "b": "b_exponent",
    "chars": "characters",
    "coeffs": "coefficients",
    "c": "c_override",
    "out": "output",
}

EXTREMAL_PATTERNS = (0, 1, 2, 3)
THRESHOLD_MARGIN = 1.25


@dataclass(frozen=True)
class ExperimentConfig:
    d: int
    x: int
    b_exponent: float = 1.0
    characters: Union[str, list[int]] = "all"
    coefficients: str = "ones"
    trials: int = 1
    seed: int = 0
    c_override: Optional[float] = None
    sigma_max: Optional[float] = None
    output: str = ""
    format: str = "json"
    record_threshold: bool = False

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "ExperimentConfig":
        normalized = {}
        for key, value in data.items():
            if value is None:
                continue
            name = KEY_ALIASES.get(key.replace("-", "_"), key.replace("-", "_"))
            if name == "characters" and isinstance(value, (list, tuple)):
                value = ",".join(str(v) for v in value)
            normalized[name] = value
        serializer = ExperimentConfigSerializer(data=normalized)
        if not serializer.is_valid():
            raise ConfigError(_format_errors(serializer.errors))
        return cls(**serializer.validated_data)

    @property
    def spec(self) -> SumSpec:
        return SumSpec(self.d, self.x, self.b_exponent, self.sigma_max)

    def as_dict(self) -> dict:
        return asdict(self)


def _format_errors(errors: Mapping[str, Any]) -> str:
    parts = []
    for name, messages in errors.items():
        text = "; ".join(str(m) for m in messages) if isinstance(messages, list) else str(messages)
        parts.append(text if name == "non_field_errors" else f"{name}: {text}")
    return ", ".join(parts)


def read_config_file(path: Union[Path, str]) -> dict[str, str]:
    """Plain key=value lines; '#' starts a comment."""
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    values: dict[str, str] = {}
    for lineno, line in enumerate(lines, start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        key, sep, value = text.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def lemma_threshold(D: int) -> float:
    default = float(getattr(settings, "LSL_LEMMA_THRESHOLD", 1.0))
    path = Path(getattr(settings, "LSL_LEMMA_THRESHOLD_FILE", ""))
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        return default
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read lemma thresholds from {path}: {exc}") from exc
    pinned = data.get("by_modulus", {}).get(str(D))
    return float(pinned if pinned is not None else data.get("default", default))


def record_lemma_threshold(D: int, observed: float) -> float:
    path = Path(getattr(settings, "LSL_LEMMA_THRESHOLD_FILE", ""))
    try:
        data = json.loads(path.read_text()) if path.exists() else {}
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read lemma thresholds from {path}: {exc}") from exc
    value = float(observed) * THRESHOLD_MARGIN
    data.setdefault("by_modulus", {})[str(D)] = value
    path.write_text(json.dumps(data, sort_keys=True, indent=2) + "\n")
    logger.info("pinned lemma threshold %.6f for D=%d in %s", value, D, path)
    return value


def trial_seeds(seed: int, trials: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(trials)]


def draw_coefficients(config: ExperimentConfig, spec: SumSpec, seed: int) -> CoefficientVector:
    table = spec.table()
    selector = config.coefficients
    if selector == "ones":
        return CoefficientVector.ones(table, spec.D, spec.x)
    if selector == "random-complex":
        return CoefficientVector.random_complex(table, spec.D, spec.x, np.random.default_rng(seed))
    if selector == "random-real":
        return CoefficientVector.random_real(table, spec.D, spec.x, np.random.default_rng(seed))
    return read_coefficient_file(selector, table, spec.D, spec.x)


@dataclass
class SubcommandResult:
    passed: bool
    constants: dict = field(default_factory=dict)
    reports: list = field(default_factory=list)
    write_csv: Optional[Callable[[TextIO], int]] = None


@dataclass(frozen=True)
class ExperimentOutcome:
    exit_code: int
    passed: Optional[bool]
    message: str
    text: str = ""


class ExperimentService:
    def __init__(self, record: Optional[bool] = None):
        self.record = bool(getattr(settings, "LSL_RECORD_RUNS", True) if record is None else record)
        self.log_max_chars = int(getattr(settings, "LSL_LOG_MAX_CHARS", 200000))
        self.run_record: Optional[ExperimentRun] = None

    def run(self, name: str, config: ExperimentConfig, stream: Optional[TextIO] = None) -> ExperimentOutcome:
        handler = SUBCOMMANDS.get(name)
        if handler is None:
            return ExperimentOutcome(EXIT_CONFIG, None, f"unknown subcommand {name!r}")
        run = self._open_run(name, config)
        outcome = ExperimentOutcome(EXIT_CONFIG, None, "not started")
        try:
            self.log_event(ExperimentLogEvent.STEP_CONFIG, f"{name} d={config.d} x={config.x}", metadata=config.as_dict())
            result = handler(config, self)
            text = self._render(name, config, result)
            self._write(config, text, stream)
            code = EXIT_PASSED if result.passed else EXIT_VIOLATED
            message = "passed" if result.passed else "inequality violated"
            outcome = ExperimentOutcome(code, result.passed, message, text)
            self.log_event(ExperimentLogEvent.STEP_REPORT, message, content=text)
        except LargeSieveError as exc:
            outcome = ExperimentOutcome(EXIT_CONFIG, None, str(exc))
            self.log_event(ExperimentLogEvent.STEP_ERROR, str(exc)[:255], level=ExperimentLogEvent.LEVEL_ERROR)
        except Exception as exc:
            outcome = ExperimentOutcome(EXIT_CONFIG, None, f"{type(exc).__name__}: {exc}")
            raise
        finally:
            self._close_run(run, outcome)
        logger.info("%s finished with exit code %d: %s", name, outcome.exit_code, outcome.message)
        return outcome

    def log_event(
        self,
        step: str,
        message: str,
        *,
        content: str = "",
        metadata: Optional[dict] = None,
        level: str = ExperimentLogEvent.LEVEL_INFO,
    ) -> None:
        if self.run_record is None:
            return
        clipped, meta = self._clip_log(content)
        meta.update(metadata or {})
        try:
            ExperimentLogEvent.objects.create(
                run=self.run_record,
                step=step,
                level=level,
                message=message[:255],
                content=clipped,
                metadata=meta,
            )
        except DatabaseError as exc:
            logger.warning("could not store log event: %s", exc)

    def _clip_log(self, text: str) -> tuple[str, dict]:
        if not text:
            return "", {}
        max_chars = max(0, self.log_max_chars)
        if max_chars <= 0 or len(text) <= max_chars:
            return text, {}
        head = int(max_chars * 0.7)
        tail = max_chars - head
        clipped = text[:head] + "\n...\n" + text[-tail:]
        return clipped, {"clipped": True, "original_chars": len(text), "stored_chars": len(clipped)}

    def _open_run(self, name: str, config: ExperimentConfig) -> Optional[ExperimentRun]:
        self.run_record = None
        if not self.record:
            return None
        try:
            self.run_record = ExperimentRun.objects.create(
                status=ExperimentRun.STATUS_RUNNING,
                subcommand=name,
                config=config.as_dict(),
            )
        except DatabaseError as exc:
            logger.warning("run recording disabled, database unavailable: %s", exc)
        return self.run_record

    def _close_run(self, run: Optional[ExperimentRun], outcome: ExperimentOutcome) -> None:
        if run is None:
            return
        if outcome.exit_code == EXIT_PASSED:
            run.status = ExperimentRun.STATUS_DONE
        elif outcome.exit_code == EXIT_VIOLATED:
            run.status = ExperimentRun.STATUS_VIOLATED
        else:
            run.status = ExperimentRun.STATUS_FAILED
            run.last_error = outcome.message[:2000]
        run.exit_code = outcome.exit_code
        run.passed = outcome.passed
        run.report = json.loads(outcome.text) if outcome.text.startswith("{") else {}
        run.ended_at = datetime.now(timezone.utc)
        try:
            run.save(update_fields=["status", "last_error", "exit_code", "passed", "report", "ended_at"])
        except DatabaseError as exc:
            logger.warning("could not close run record %s: %s", run.pk, exc)

    def _render(self, name: str, config: ExperimentConfig, result: SubcommandResult) -> str:
        if config.format == "csv":
            if result.write_csv is None:
                raise ConfigError(f"{name} has no csv output")
            buffer = StringIO()
            result.write_csv(buffer)
            return buffer.getvalue()
        payload = {
            "config": config.as_dict(),
            "subcommand": name,
            "passed": bool(result.passed),
            "constants": result.constants,
            "reports": result.reports,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    def _write(self, config: ExperimentConfig, text: str, stream: Optional[TextIO]) -> None:
        if config.output:
            try:
                Path(config.output).write_text(text)
            except OSError as exc:
                raise ConfigError(f"cannot write {config.output}: {exc}") from exc
        elif stream is not None:
            stream.write(text)


def _selected(config: ExperimentConfig) -> list[Character]:
    chosen = select_characters(config.d, config.characters)
    if not chosen:
        raise ConfigError(f"character selector {config.characters!r} picks nothing mod {config.d}")
    return chosen


def _check_coefficients(config: ExperimentConfig) -> None:
    selector = config.coefficients
    if selector not in COEFFICIENT_SELECTORS and not Path(selector).is_file():
        raise ConfigError(f"coefficient selector {selector!r} is neither a known draw nor a readable file")


def _write_rows(header: list[str], rows: list[list]) -> Callable[[TextIO], int]:
    def write(stream: TextIO) -> int:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
        return len(rows)

    return write


def run_characters(config: ExperimentConfig, service: ExperimentService) -> SubcommandResult:
    chosen = _selected(config)
    orthogonality = verify_orthogonality(config.d)
    service.log_event(
        ExperimentLogEvent.STEP_VERIFICATION,
        f"orthogonality deviation {orthogonality.max_deviation:.3e}",
        level=ExperimentLogEvent.LEVEL_INFO if orthogonality.passed else ExperimentLogEvent.LEVEL_WARN,
    )
    return SubcommandResult(
        passed=orthogonality.passed,
        constants={
            "phi": totient(config.d),
            "group_size": orthogonality.size,
            "orthogonality_max_deviation": orthogonality.max_deviation,
        },
        reports=list(CharacterSerializer(chosen, many=True).data),
        write_csv=lambda stream: write_character_table(config.d, stream, chosen),
    )


def run_lemma_scan(config: ExperimentConfig, service: ExperimentService) -> SubcommandResult:
    chosen = [chi for chi in _selected(config) if not chi.is_principal]
    if not chosen:
        raise ConfigError(f"no non-principal character selected mod {config.d}")
    spec = config.spec
    w_grid = dyadic_grid(spec.D, spec.x)
    scans = [lemma_sup_scan(chi, spec, w_grid) for chi in chosen]
    observed = max(scan.empirical_max for scan in scans)
    if config.record_threshold:
        threshold = record_lemma_threshold(spec.D, observed)
    else:
        threshold = lemma_threshold(spec.D)
    service.log_event(
        ExperimentLogEvent.STEP_SCAN,
        f"{len(scans)} characters, max {observed:.6f} against {threshold:.6f}",
        metadata={"w_grid": w_grid},
    )
    return SubcommandResult(
        passed=observed <= threshold,
        constants={"threshold": threshold, "empirical_max": observed},
        reports=list(LemmaScanReportSerializer(scans, many=True).data),
        write_csv=lambda stream: write_scan_profile(scans, stream),
    )


def _run_verification(config: ExperimentConfig, service: ExperimentService, real_part: bool) -> SubcommandResult:
    _check_coefficients(config)
    chosen = _selected(config)
    spec = config.spec
    L = sum_reciprocal_primes(spec.D, spec.x, spec.table())
    c1_hat = None
    c = config.c_override
    if c is None:
        c1_hat = default_c1(chosen, spec, with_conjugates=real_part)
        c = 4.0 * c1_hat
        service.log_event(ExperimentLogEvent.STEP_CONSTANTS, f"c1_hat={c1_hat:.6f}, c={c:.6f}")
    check = variant_re_bound if real_part else verify_theorem
    reports = []
    for trial_seed in trial_seeds(config.seed, config.trials):
        a = draw_coefficients(config, spec, trial_seed)
        report = check(a, chosen, spec, c, seed=trial_seed, c1_hat=c1_hat)
        if not report.passed:
            service.log_event(
                ExperimentLogEvent.STEP_VERIFICATION,
                f"violation at seed {trial_seed}: ratio {report.ratio:.9f}",
                level=ExperimentLogEvent.LEVEL_WARN,
            )
        reports.append(report)
    rows = [[r.seed, r.k, repr(r.lhs), repr(r.rhs), repr(r.ratio), repr(r.c_used), r.passed] for r in reports]
    return SubcommandResult(
        passed=all(r.passed for r in reports),
        constants={"L": L, "c1_hat": c1_hat, "c_used": float(c), "max_ratio": max(r.ratio for r in reports)},
        reports=list(VerificationReportSerializer(reports, many=True).data),
        write_csv=_write_rows(["seed", "k", "lhs", "rhs", "ratio", "c_used", "passed"], rows),
    )


def run_verify(config: ExperimentConfig, service: ExperimentService) -> SubcommandResult:
    return _run_verification(config, service, real_part=False)


def run_variant_verify(config: ExperimentConfig, service: ExperimentService) -> SubcommandResult:
    return _run_verification(config, service, real_part=True)


def run_estimate_constants(config: ExperimentConfig, service: ExperimentService) -> SubcommandResult:
    estimate = scan_cross_constant(config.spec, _selected(config))
    service.log_event(
        ExperimentLogEvent.STEP_CONSTANTS,
        f"c1_hat={estimate.c1_hat:.6f} L={estimate.L:.6f}",
    )
    data = ConstantEstimateSerializer(estimate).data
    return SubcommandResult(
        passed=True,
        constants={"c1_hat": data["c1_hat"], "L": data["L"], "c_default": data["c_default"]},
        reports=list(data["scans"]),
        write_csv=lambda stream: write_scan_profile(estimate.scans, stream),
    )


def run_extremal(config: ExperimentConfig, service: ExperimentService) -> SubcommandResult:
    chosen = _selected(config)
    spec = config.spec
    k = len(chosen)
    c1_hat = scan_cross_constant(spec, chosen).c1_hat if k >= 2 else 0.0
    h = t_spacing(spec.x)
    cutoffs = [y for y in dyadic_grid(spec.D, spec.x) if y > spec.D]
    reports, rows, passed = [], [], True
    for pattern in EXTREMAL_PATTERNS:
        shifts = [j * pattern * h for j in range(k)]
        if shifts[-1] > spec.t_max:
            continue
        for y in cutoffs:
            report = extremal_ratio(chosen, spec, shifts, [y] * k, c1_hat=c1_hat)
            sane = report.lambda_max >= report.lambda_without_cross_terms * (1.0 - 1e-9)
            passed = passed and sane
            reports.append({"pattern": pattern, "sanity": sane, **ExtremalReportSerializer(report).data})
            rows.append(
                [pattern, y, repr(report.lambda_max), repr(report.L), repr(report.ratio_to_L),
                 repr(report.ratio_to_bound), repr(report.max_diagonal_ratio)]
            )
    service.log_event(ExperimentLogEvent.STEP_SCAN, f"{len(reports)} extremal grid points")
    return SubcommandResult(
        passed=passed,
        constants={"c1_hat": c1_hat, "L": sum_reciprocal_primes(spec.D, spec.x, spec.table())},
        reports=reports,
        write_csv=_write_rows(
            ["pattern", "cutoff", "lambda_max", "L", "ratio_to_L", "ratio_to_bound", "max_diagonal_ratio"], rows
        ),
    )


def run_duality_selftest(config: ExperimentConfig, service: ExperimentService) -> SubcommandResult:
    chosen = _selected(config)
    spec = config.spec
    reports = []
    passed = True
    if spec.D < spec.x:
        h = t_spacing(spec.x)
        delta = build_delta(chosen, [j * h for j in range(len(chosen))], [spec.x] * len(chosen), spec)
        check = duality_check(delta, config.trials, config.seed)
        passed = check.passed
        reports.append({"kind": "characters", **DualityReportSerializer(check).data})
    selftest = duality_selftest(config.seed)
    passed = passed and selftest.passed
    reports.append({"kind": "synthetic", **SelftestReportSerializer(selftest).data})
    service.log_event(ExperimentLogEvent.STEP_VERIFICATION, f"duality self-test passed={passed}")
    rows = [[r["kind"], r.get("lambda_max", r.get("fixture_lambda")), r["passed"]] for r in reports]
    return SubcommandResult(
        passed=passed,
        reports=reports,
        write_csv=_write_rows(["kind", "lambda_max", "passed"], rows),
    )


def run_abel_check(config: ExperimentConfig, service: ExperimentService) -> SubcommandResult:
    _check_coefficients(config)
    chosen = _selected(config)
    spec = config.spec
    reports, rows = [], []
    for trial_seed in trial_seeds(config.seed, config.trials):
        a = draw_coefficients(config, spec, trial_seed)
        for chi in chosen:
            report = abel_reduction_check(chi, a, spec)
            reports.append({"seed": trial_seed, **AbelReportSerializer(report).data})
            rows.append([trial_seed, report.character, repr(report.m1), repr(report.m_rect), repr(report.ratio), report.passed])
    passed = all(r["passed"] for r in reports)
    service.log_event(ExperimentLogEvent.STEP_VERIFICATION, f"{len(reports)} Abel checks, passed={passed}")
    return SubcommandResult(
        passed=passed,
        constants={"bound_factor": 2.0, "max_ratio": max((r["ratio"] for r in reports), default=0.0)},
        reports=reports,
        write_csv=_write_rows(["seed", "character", "m1", "m_rect", "ratio", "passed"], rows),
    )


SUBCOMMANDS: dict[str, Callable[[ExperimentConfig, ExperimentService], SubcommandResult]] = {
    "characters": run_characters,
    "lemma-scan": run_lemma_scan,
    "verify": run_verify,
    "variant-verify": run_variant_verify,
    "estimate-constants": run_estimate_constants,
    "extremal": run_extremal,
    "duality-selftest": run_duality_selftest,
    "abel-check": run_abel_check,
}


def run_subcommand(
    name: str,
    config: Union[ExperimentConfig, Mapping[str, Any]],
    stream: Optional[TextIO] = None,
    *,
    record: Optional[bool] = None,
) -> int:
    """Run one experiment; 0 on pass, 1 on a violated inequality, 2 on bad input."""
    try:
        resolved = config if isinstance(config, ExperimentConfig) else ExperimentConfig.from_mapping(config)
    except ConfigError as exc:
        logger.error("%s: %s", name, exc)
        return EXIT_CONFIG
    return ExperimentService(record=record).run(name, resolved, stream).exit_code
