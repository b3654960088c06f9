"""
The experiment configuration language.

A configuration is a flat key-value text file divided in ``[sections]``:

::

    # Exit times of the nucleation from an empty lattice
    [lattice]
    n_sites = 1000
    coarse_q = [1, 10, 100]
    interaction_range = 100

    [model]
    beta_j0 = 6.0
    c0 = 0.072

    [run]
    t_final = 2000.0
    realizations = 500
    sampling_dt = 1.0

Values are integers, floats, quoted strings, bare words (``paper``, ``uniform``) or bracketed
lists of those. The file is parsed with a lark grammar, turned into plain values by
``ConfigToValue`` and validated against a fixed schema. Every problem found (unknown sections
or keys, missing keys, wrong types, out of range values, inconsistent geometry) is collected
and reported at once through a single ``ConfigError``.

:author: Athanasios Anastasiou
:date: Oct 2026
"""

import collections
import hashlib
import json
import pathlib

import lark

from .exceptions import ConfigError, LatticeSpecError
from .lattice import LatticeSpec, PotentialModel

LatticeSection = collections.namedtuple("LatticeSection", ["n_sites", "coarse_q", "interaction_range"])
ModelSection = collections.namedtuple("ModelSection", ["beta_j0", "beta", "d0", "c0", "h", "shape"])
RunSection = collections.namedtuple("RunSection", ["t_final", "realizations", "master_seed", "sampling_dt",
                                                   "threshold_c_plus", "time_step_mode", "updating", "process",
                                                   "initial", "initial_coverage", "island_size"])
OutputsSection = collections.namedtuple("OutputsSection", ["directory", "snapshot_times"])
MeanFieldSection = collections.namedtuple("MeanFieldSection", ["h_min", "h_max", "h_points"])

# Marks a key without a default
REQUIRED = object()

_Field = collections.namedtuple("_Field", ["kind", "default", "check", "message"])


def _field(kind, default=REQUIRED, check=None, message=""):
    return _Field(kind, default, check, message)


_SCHEMA = {
    "lattice": (LatticeSection, {
        "n_sites": _field("int", check=lambda v: v >= 1, message="must be positive"),
        "coarse_q": _field("int_list", [1], lambda v: len(v) > 0 and min(v) >= 1, "must be a non-empty list of positive integers"),
        "interaction_range": _field("int", check=lambda v: v >= 0, message="must be non-negative"),
    }),
    "model": (ModelSection, {
        "beta_j0": _field("float"),
        "beta": _field("float", 1.0, lambda v: v > 0, "must be positive"),
        "d0": _field("float", 1.0, lambda v: v > 0, "must be positive"),
        "c0": _field("float", None, lambda v: v > 0, "must be positive"),
        "h": _field("float", None),
        "shape": _field("str", "uniform", lambda v: v in ("uniform",), "must be uniform"),
    }),
    "run": (RunSection, {
        "t_final": _field("float", check=lambda v: v > 0, message="must be positive"),
        "realizations": _field("int", check=lambda v: v >= 1, message="must be at least 1"),
        "master_seed": _field("int", 0, lambda v: v >= 0, "must be non-negative"),
        "sampling_dt": _field("float", check=lambda v: v > 0, message="must be positive"),
        "threshold_c_plus": _field("float", 0.9, lambda v: 0 < v <= 1, "must lie in (0, 1]"),
        "time_step_mode": _field("str", "paper", lambda v: v in ("paper", "exponential"), "must be paper or exponential"),
        "updating": _field("str", "local", lambda v: v in ("local", "global"), "must be local or global"),
        "process": _field("str", "coarse", lambda v: v in ("coarse", "synthetic"), "must be coarse or synthetic"),
        "initial": _field("str", "empty", lambda v: v in ("empty", "full", "uniform", "island"),
                          "must be one of empty, full, uniform, island"),
        "initial_coverage": _field("float", 0.5, lambda v: 0 <= v <= 1, "must lie in [0, 1]"),
        "island_size": _field("int", 0, lambda v: v >= 0, "must be non-negative"),
    }),
    "outputs": (OutputsSection, {
        "directory": _field("str", "out"),
        "snapshot_times": _field("float_list", [], lambda v: all(t >= 0 for t in v), "must be non-negative times"),
    }),
    "mean_field": (MeanFieldSection, {
        "h_min": _field("float", -2.0),
        "h_max": _field("float", 8.0),
        "h_points": _field("int", 1001, lambda v: v >= 2, "must be at least 2"),
    }),
}

_REQUIRED_SECTIONS = ("lattice", "model", "run")


class ConfigToValue(lark.Transformer):
    """
    Transforms the parse tree of a configuration file to a list of
    ``(section, [(key, value, line), ...], line)`` tuples.
    """
    def start(self, cap):
        return list(cap)

    def section(self, cap):
        return (cap[0].value[1:-1].strip(), list(cap[1:]), cap[0].line)

    def entry(self, cap):
        return (cap[0].value, cap[1], cap[0].line)

    def value_list(self, cap):
        return list(cap)

    def VALUE_STR(self, s):
        return s.value[1:-1]

    def VALUE_WORD(self, s):
        return s.value

    def VALUE_INT(self, n):
        return int(n.value)

    def VALUE_FLOAT(self, n):
        return float(n.value)


def _config_grammar():
    return r"""
    start: _NL? section*
    section: SECTION_NAME _NL (entry _NL)*
    entry: KEY "=" value
    ?value: VALUE_FLOAT | VALUE_INT | VALUE_STR | VALUE_WORD | value_list
    value_list: "[" (value ("," value)*)? "]"

    SECTION_NAME: /\[[ \t]*[a-z_][a-z0-9_]*[ \t]*\]/
    KEY: /[a-z_][a-z0-9_]*/
    VALUE_FLOAT.2: /[+-]?([0-9]+\.[0-9]*|\.[0-9]+)([eE][+-]?[0-9]+)?/ | /[+-]?[0-9]+[eE][+-]?[0-9]+/
    VALUE_INT: /[+-]?[0-9]+/
    VALUE_STR: /"[^"\n]*"/ | /'[^'\n]*'/
    VALUE_WORD: /[A-Za-z_][A-Za-z0-9_\-]*/
    COMMENT: /#[^\n]*/
    _NL: /(\r?\n[\t ]*(#[^\n]*)?)+/

    %ignore COMMENT
    %ignore /[\t ]+/
    """


_parser = lark.Lark(_config_grammar(), parser="lalr", start="start")


def _coerce(kind, value):
    # Returns (value, ok)
    if kind == "int":
        return value, isinstance(value, int)
    if kind == "float":
        return (float(value), True) if isinstance(value, (int, float)) else (value, False)
    if kind == "str":
        return value, isinstance(value, str)
    if kind == "int_list":
        value = [value] if isinstance(value, int) else value
        return value, isinstance(value, list) and all(isinstance(v, int) for v in value)
    if kind == "float_list":
        value = [value] if isinstance(value, (int, float)) else value
        ok = isinstance(value, list) and all(isinstance(v, (int, float)) for v in value)
        return ([float(v) for v in value] if ok else value), ok
    raise ValueError(f"Unknown field kind {kind}")


class ExperimentConfig:
    """
    A validated experiment configuration.

    :param lattice: The ``[lattice]`` section
    :type lattice: LatticeSection
    :param model: The ``[model]`` section
    :type model: ModelSection
    :param run: The ``[run]`` section
    :type run: RunSection
    :param outputs: The ``[outputs]`` section
    :type outputs: OutputsSection
    :param mean_field: The ``[mean_field]`` section
    :type mean_field: MeanFieldSection
    """
    def __init__(self, lattice, model, run, outputs, mean_field):
        self._lattice = lattice
        self._model = model
        self._run = run
        self._outputs = outputs
        self._mean_field = mean_field

    @property
    def lattice(self):
        return self._lattice

    @property
    def model(self):
        return self._model

    @property
    def run(self):
        return self._run

    @property
    def outputs(self):
        return self._outputs

    @property
    def mean_field(self):
        return self._mean_field

    @property
    def coarse_qs(self):
        return list(self._lattice.coarse_q)

    def lattice_spec(self, coarse_q=1):
        return LatticeSpec(self._lattice.n_sites, coarse_q, self._lattice.interaction_range)

    def potential_model(self):
        m = self._model
        return PotentialModel.from_beta_j0(m.beta_j0, beta=m.beta, d0=m.d0, c0=m.c0,
                                           h=0.0 if m.h is None else m.h, shape=m.shape)

    def with_overrides(self, master_seed=None, time_step_mode=None, directory=None):
        """
        Return a copy with command line overrides applied (``None`` leaves a value untouched).
        """
        run, outputs = self._run, self._outputs
        if master_seed is not None:
            run = run._replace(master_seed=int(master_seed))
        if time_step_mode is not None:
            run = run._replace(time_step_mode=time_step_mode)
        if directory is not None:
            outputs = outputs._replace(directory=str(directory))
        return ExperimentConfig(self._lattice, self._model, run, outputs, self._mean_field)

    def as_dict(self):
        return {name: dict(getattr(self, name)._asdict()) for name in _SCHEMA}

    def config_hash(self):
        """
        SHA-256 of the canonical JSON form of the configuration.
        """
        return hashlib.sha256(json.dumps(self.as_dict(), sort_keys=True).encode("utf-8")).hexdigest()

    def dumps(self):
        """
        Serialise back to the configuration language (``parse_config(c.dumps())`` reproduces ``c``).
        """
        lines = []
        for name, values in self.as_dict().items():
            lines.append(f"[{name}]")
            for key, value in values.items():
                if value is not None:
                    lines.append(f"{key} = {_format_value(value)}")
            lines.append("")
        return "\n".join(lines)


def _format_value(value):
    if isinstance(value, list):
        return "[" + ", ".join(_format_value(v) for v in value) + "]"
    if isinstance(value, str):
        return f'"{value}"'
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _validate(sections):
    errors = []
    values = {}
    seen = {}
    for name, entries, line in sections:
        if name not in _SCHEMA:
            errors.append(f"line {line}: unknown section [{name}]")
            continue
        if name in values:
            errors.append(f"line {line}: section [{name}] appears more than once")
            continue
        fields = _SCHEMA[name][1]
        section_values = {}
        seen[name] = set()
        for key, value, key_line in entries:
            if key not in fields:
                errors.append(f"line {key_line}: unknown key {name}.{key}")
                continue
            if key in seen[name]:
                errors.append(f"line {key_line}: key {name}.{key} is set more than once")
                continue
            seen[name].add(key)
            field = fields[key]
            value, ok = _coerce(field.kind, value)
            if not ok:
                errors.append(f"line {key_line}: {name}.{key} expects {field.kind.replace('_', ' ')}, received {value!r}")
                continue
            if field.check is not None and not field.check(value):
                errors.append(f"line {key_line}: {name}.{key} {field.message}, received {value!r}")
                continue
            section_values[key] = value
        values[name] = section_values

    built = {}
    for name, (section_type, fields) in _SCHEMA.items():
        if name not in values and name in _REQUIRED_SECTIONS:
            errors.append(f"missing section [{name}]")
            continue
        given = values.get(name, {})
        missing = [key for key, field in fields.items() if field.default is REQUIRED and key not in given]
        # Keys that were given but rejected are already reported
        errors += [f"missing key {name}.{key}" for key in missing if key not in seen.get(name, ())]
        if missing:
            continue
        built[name] = section_type(**{key: given.get(key, field.default) for key, field in fields.items()})
    return built, errors


def _cross_validate(built):
    errors = []
    lattice, model, run, mean_field = (built.get(k) for k in ("lattice", "model", "run", "mean_field"))
    if lattice is not None:
        for q in lattice.coarse_q:
            try:
                LatticeSpec(lattice.n_sites, q, lattice.interaction_range)
            except LatticeSpecError as e:
                errors.append(f"lattice: {e}")
        if 1 not in lattice.coarse_q:
            errors.append("lattice.coarse_q must include the microscopic level 1")
        if run is not None and run.island_size > lattice.n_sites:
            errors.append(f"run.island_size={run.island_size} exceeds lattice.n_sites={lattice.n_sites}")
    if model is not None and model.c0 is not None and model.h is not None:
        errors.append("model.c0 and model.h are mutually exclusive")
    if run is not None:
        outputs = built.get("outputs")
        if outputs is not None and any(t > run.t_final for t in outputs.snapshot_times):
            errors.append("outputs.snapshot_times must not exceed run.t_final")
    if mean_field is not None and mean_field.h_max <= mean_field.h_min:
        errors.append("mean_field.h_max must exceed mean_field.h_min")
    return errors


def parse_config(text):
    """
    Parse and validate the text of a configuration.

    :param text: The configuration
    :type text: str
    :rtype: ExperimentConfig
    :raises ConfigError: Listing every problem found
    """
    try:
        tree = _parser.parse(text if text.endswith("\n") else text + "\n")
    except lark.exceptions.UnexpectedInput as e:
        raise ConfigError([f"line {e.line}, column {e.column}: syntax error"]) from e
    sections = ConfigToValue().transform(tree)
    built, errors = _validate(sections)
    errors += _cross_validate(built)
    if errors:
        raise ConfigError(errors)
    # Optional sections absent from the file were built from their defaults
    return ExperimentConfig(**built)


def load_config(path):
    """
    Read, parse and validate a configuration file.

    :type path: str | pathlib.Path
    :rtype: ExperimentConfig
    """
    path = pathlib.Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError([f"cannot read {path}: {e}"]) from e
    return parse_config(text)
