"""Command-line interface.

Usage:
    shapnarr predict --row 3
    shapnarr shap --method permutation --permutations 2000 --format json
    shapnarr explain --backend http --llm-url http://localhost:8000
    shapnarr verify --text-file answer.txt
    shapnarr demo

Without path flags every command runs on the bundled Titanic fixtures.
Settings resolve as: command-line flag, then environment variable
(``SHAPNARR_LLM_URL`` only), then ``--config`` JSON file, then built-in
default. Results go to stdout; a failure prints one line
``CATEGORY: message`` to stderr and exits 1.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path

from . import __version__
from .errors import DataError, ModelError, ShapnarrError
from .explain import (
    GenerationParams,
    HttpBackend,
    TemplateBackend,
    build_attribution_payload,
    explain,
    load_template,
    verify_explanation,
)
from .explain.backends import URL_ENV
from .explain.payload import AttributionPayload, format_value
from .ingest import Dataset, load_csv, load_schema, select_background
from .model import TreeEnsemble, load_model_files, predict_margin, predict_probability
from .shapley import ShapResult, exact_shap, permutation_shap

COMMANDS = ("predict", "shap", "explain", "verify", "demo")


def fixture_path(name: str) -> str:
    return str(resources.files("shapnarr.fixtures").joinpath(name))


@dataclass
class RunConfig:
    model: str = ""
    meta: str = ""
    schema: str = ""
    data: str = ""
    background_data: str | None = None
    row: int = 0
    background_k: int = 32
    seed: int = 7
    method: str = "exact"
    permutations: int = 1000
    jobs: int = 1
    top_k: int = 5
    backend: str = "template"
    llm_url: str | None = None
    template: str | None = None
    temperature: float = 0.2
    max_tokens: int = 256
    model_name: str = "mistral-7b-instruct"
    timeout: float = 30.0
    retries: int = 2
    max_chars: int = 1200
    format: str = "json"
    text_file: str | None = None

    def __post_init__(self):
        self.model = self.model or fixture_path("titanic_model.json")
        self.meta = self.meta or fixture_path("titanic_meta.json")
        self.schema = self.schema or fixture_path("titanic_schema.json")
        self.data = self.data or fixture_path("titanic.csv")

    def validate(self) -> None:
        if self.method not in ("exact", "permutation"):
            raise UsageError(f"--method must be exact or permutation, not {self.method!r}")
        if self.method == "permutation" and self.permutations < 1:
            raise UsageError("--permutations must be at least 1")
        if self.backend not in ("http", "template"):
            raise UsageError(f"--backend must be http or template, not {self.backend!r}")
        if self.backend == "http" and not self.llm_url:
            raise UsageError(f"--backend http needs --llm-url, ${URL_ENV} or 'llm_url' in the config file")
        if self.format not in ("json", "text"):
            raise UsageError(f"--format must be json or text, not {self.format!r}")
        if self.top_k < 1:
            raise UsageError("--top-k must be at least 1")

    def params(self) -> GenerationParams:
        return GenerationParams(
            temperature=self.temperature,
            max_tokens=self.max_tokens,
            model_name=self.model_name,
            timeout=self.timeout,
            retries=self.retries,
        )


class UsageError(ShapnarrError):
    category = "USAGE"


class _Parser(argparse.ArgumentParser):
    # report bad arguments like every other failure: one line, exit 1
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="shapnarr", description="Explain tree-ensemble predictions with SHAP values in plain language."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=COMMANDS)
    a = parser.add_argument
    # every default is None so that unset flags fall through to env/config/defaults
    a("--config", help="JSON file with default settings (keys as the long flag names, '-' -> '_')")
    a("--model", help="tree dump JSON (default: bundled Titanic model)")
    a("--meta", help="model metadata JSON")
    a("--schema", help="column schema JSON")
    a("--data", help="CSV with the instance(s) to explain")
    a("--background-data", help="CSV to draw the background set from (default: --data)")
    a("--row", type=int, help="0-based data row to explain (default 0)")
    a("--background-k", type=int, help="background rows to sample (default 32)")
    a("--seed", type=int, help="seed for background sampling and permutations (default 7)")
    a("--method", choices=("exact", "permutation"), help="SHAP algorithm (default exact)")
    a("--permutations", type=int, help="permutations for --method permutation (default 1000)")
    a("--jobs", type=int, help="worker threads for --method permutation (default 1)")
    a("--top-k", type=int, help="features to narrate (default 5)")
    a("--backend", choices=("http", "template"), help="text generator (default template)")
    a("--llm-url", help=f"base URL of a /v1/completions server (env {URL_ENV})")
    a("--template", help="prompt template file with the four placeholders")
    a("--temperature", type=float, help="sampling temperature (default 0.2)")
    a("--max-tokens", type=int, help="completion length limit (default 256)")
    a("--model-name", help="model name sent to the HTTP backend")
    a("--timeout", type=float, help="seconds per HTTP attempt (default 30)")
    a("--retries", type=int, help="extra HTTP attempts on transient failure (default 2)")
    a("--max-chars", type=int, help="explanation length cap after post-processing (default 1200)")
    a("--format", choices=("json", "text"), help="output format (default json; demo defaults to text)")
    a("--text-file", help="explanation text to check, for 'verify' ('-' reads stdin)")
    return parser


def resolve_config(args: argparse.Namespace, environ=os.environ) -> RunConfig:
    known = {f.name for f in fields(RunConfig)}
    settings: dict = {}
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(loaded) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        settings.update(loaded)
    if environ.get(URL_ENV):
        settings["llm_url"] = environ[URL_ENV]
    for name in known:
        value = getattr(args, name, None)
        if value is not None:
            settings[name] = value
    if args.command == "demo":
        for name in ("model", "meta", "schema", "data", "background_data"):
            settings.pop(name, None)
        settings.setdefault("format", "text")
        settings["backend"] = "template"
    try:
        cfg = RunConfig(**settings)
    except TypeError as exc:
        raise UsageError(str(exc)) from exc
    cfg.validate()
    return cfg


# --------------------------------------------------------------------------


@dataclass
class _Loaded:
    model: TreeEnsemble
    data: Dataset
    background: list
    x: tuple


def _load(cfg: RunConfig, need_background: bool) -> _Loaded:
    try:
        model = load_model_files(cfg.model, cfg.meta)
    except OSError as exc:
        raise ModelError(f"cannot read model files: {exc}") from exc
    try:
        schema = load_schema(cfg.schema)
        data = load_csv(Path(cfg.data), schema)
    except OSError as exc:
        raise DataError(f"cannot read data: {exc}") from exc
    if data.feature_names != list(model.feature_names):
        raise DataError(f"data columns {data.feature_names} differ from model features {list(model.feature_names)}")
    if not 0 <= cfg.row < len(data):
        raise DataError(f"row {cfg.row} outside [0, {len(data)})")
    background = []
    if need_background:
        bg_data = data
        if cfg.background_data:
            try:
                bg_data = load_csv(Path(cfg.background_data), schema)
            except OSError as exc:
                raise DataError(f"cannot read background data: {exc}") from exc
        background = select_background(bg_data, cfg.background_k, cfg.seed)
    return _Loaded(model, data, background, data.rows[cfg.row])


def _prediction(model: TreeEnsemble, x) -> dict:
    margin = predict_margin(model, x)
    prob = predict_probability(model, x) if model.objective == "binary_logistic" else None
    label = None
    if prob is not None and model.labels is not None:
        label = model.labels[1] if prob >= 0.5 else model.labels[0]
    return {"margin": margin, "probability": prob, "label": label}


def _shap(cfg: RunConfig, loaded: _Loaded) -> ShapResult:
    if cfg.method == "exact":
        return exact_shap(loaded.model, loaded.x, loaded.background)
    return permutation_shap(loaded.model, loaded.x, loaded.background, cfg.permutations, cfg.seed, cfg.jobs)


def _payload(loaded: _Loaded, shap: ShapResult, pred: dict) -> AttributionPayload:
    value_labels = {
        c.name: {code: label for label, code in c.category_map.items()}
        for c in loaded.data.schema
        if c.kind == "categorical"
    }
    return build_attribution_payload(
        shap,
        loaded.model.feature_names,
        loaded.x,
        probability=pred["probability"],
        label=pred["label"],
        value_labels=value_labels,
    )


def _provenance(cfg: RunConfig, command: str, shap: ShapResult | None = None) -> dict:
    prov = {
        "command": command,
        "version": __version__,
        "model": cfg.model,
        "meta": cfg.meta,
        "schema": cfg.schema,
        "data": cfg.data,
        "background_data": cfg.background_data or cfg.data,
        "row": cfg.row,
        "background_k": cfg.background_k,
        "seed": cfg.seed,
        "method": cfg.method,
    }
    if shap is not None:
        prov["n_permutations"] = shap.n_permutations
    if command in ("explain", "demo", "verify"):
        prov["top_k"] = cfg.top_k
    if command in ("explain", "demo"):
        prov["backend_id"] = "template" if cfg.backend == "template" else f"http:{cfg.llm_url}"
        prov["params"] = cfg.params().to_dict()
        prov["max_chars"] = cfg.max_chars
    return prov


def _shap_block(loaded: _Loaded, shap: ShapResult) -> dict:
    block = {
        "base_value": shap.base_value,
        "predicted_margin": shap.predicted_margin,
        "method": shap.method,
        "n_permutations": shap.n_permutations,
        "seed": shap.seed,
        "exhaustive": shap.exhaustive,
        "values": [
            {"feature": name, "value": value, "phi": phi}
            for name, value, phi in zip(loaded.model.feature_names, loaded.x, shap.phi)
        ],
    }
    if shap.std_error is not None:
        block["std_error"] = list(shap.std_error)
    return block


def execute(command: str, cfg: RunConfig) -> dict:
    """Run one command and return the JSON-ready report."""
    loaded = _load(cfg, need_background=command != "predict")
    pred = _prediction(loaded.model, loaded.x)
    report: dict = {"prediction": pred}
    if command == "predict":
        report["provenance"] = _provenance(cfg, command)
        return report

    shap = _shap(cfg, loaded)
    report["shap"] = _shap_block(loaded, shap)
    if command == "shap":
        report["provenance"] = _provenance(cfg, command, shap)
        return report

    payload = _payload(loaded, shap, pred)
    if command == "verify":
        if not cfg.text_file:
            raise UsageError("verify needs --text-file")
        try:
            text = sys.stdin.read() if cfg.text_file == "-" else Path(cfg.text_file).read_text(encoding="utf-8")
        except OSError as exc:
            raise UsageError(f"cannot read {cfg.text_file}: {exc}") from exc
        report["explanation"] = {"text": text}
        report["verification"] = verify_explanation(payload, text, cfg.top_k).to_dict()
        report["provenance"] = _provenance(cfg, command, shap)
        return report

    if cfg.backend == "template":
        backend = TemplateBackend(payload, cfg.top_k)
    else:
        backend = HttpBackend(cfg.llm_url)
    template = load_template(cfg.template) if cfg.template else None
    result = explain(payload, backend, cfg.params(), template, cfg.top_k, cfg.max_chars)
    report["explanation"] = {
        "text": result.final_text,
        "raw_text": result.raw_text,
        "prompt": result.prompt,
        "backend": result.backend_id,
        "params": result.params.to_dict(),
    }
    report["verification"] = result.verification.to_dict()
    report["provenance"] = _provenance(cfg, command, shap)
    return report


def _num(v: float | None) -> str:
    return "n/a" if v is None else f"{v:.4f}"


def render_text(report: dict) -> str:
    lines = []
    pred = report["prediction"]
    head = f"Prediction: margin {_num(pred['margin'])}, probability {_num(pred['probability'])}"
    if pred.get("label"):
        head += f" ({pred['label']})"
    lines.append(head)
    if "shap" in report:
        s = report["shap"]
        lines.append(f"SHAP ({s['method']}, margin scale): base value {_num(s['base_value'])}")
        width = max(len(v["feature"]) for v in s["values"]) if s["values"] else 0
        for v in sorted(s["values"], key=lambda v: -abs(v["phi"])):
            lines.append(f"  {v['feature']:<{width}}  {format_value(v['value']):>10}  {v['phi']:+.4f}")
    if "explanation" in report:
        backend = report["explanation"].get("backend", "supplied text")
        lines.append("")
        lines.append(f"Explanation [{backend}]:")
        lines.append(report["explanation"]["text"])
    if "verification" in report:
        v = report["verification"]
        lines.append("")
        lines.append(
            f"Verification: coverage {v['coverage']:.4f} of top {v['top_k']}, {v['contradictions']} contradictions"
        )
        for name, m, d in zip(v["features"], v["mentioned"], v["directional_consistency"]):
            lines.append(f"  {name}: {'mentioned' if m else 'not mentioned'}, {d}")
    return "\n".join(lines) + "\n"


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = resolve_config(args)
        report = execute(args.command, cfg)
    except ShapnarrError as exc:
        msg = " ".join(str(exc).split())
        print(f"{exc.category}: {msg}", file=sys.stderr)
        return 1
    if cfg.format == "json":
        sys.stdout.write(json.dumps(report, indent=2) + "\n")
    else:
        sys.stdout.write(render_text(report))
    return 0


if __name__ == "__main__":
    sys.exit(main())
