"""Strict flat key-value config files with per-task schemas.

Format: `key = value` lines, comments with '#' or ';', optional sections in
brackets.  The top section holds run-level keys (task, output, seed); the
`[metric]`, `[task]`, and `[body]` sections hold the metric spec, task
parameters, and body spec.  Unknown keys are rejected with line numbers;
randomized tasks require a seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field


class ConfigError(ValueError):
    pass


def _parse_scalar(raw, kind):
    raw = raw.strip()
    if kind == "str":
        return raw
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    if kind == "bool":
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError("not a boolean: %r" % raw)
    if kind == "intlist":
        return [int(v) for v in raw.split(",") if v.strip()]
    if kind == "floatlist":
        return [float(v) for v in raw.split(",") if v.strip()]
    if kind == "points":
        out = []
        for chunk in raw.split(";"):
            chunk = chunk.strip()
            if chunk:
                out.append([float(v) for v in chunk.split(",")])
        return out
    raise ValueError("unknown kind %r" % kind)


@dataclass
class Key:
    kind: str
    default: object = None
    required: bool = False
    help: str = ""


METRIC_SCHEMA = {
    "name": Key("str", required=True, help="catalog metric name"),
    "m": Key("int", 3, help="chart dimension"),
    "K": Key("float", 1.0, help="curvature parameter"),
    "chart": Key("str", "normal", help="sphere chart: normal|stereographic"),
    "box_half": Key("float", None, help="half edge length of the chart box"),
    "z_half": Key("float", None, help="line-factor half length (products)"),
    "c1": Key("str", "-1/6", help="revolution profile coefficient"),
    "c2": Key("str", "1/60", help="revolution profile coefficient"),
    "k": Key("int", 4, help="jet order for jet metrics"),
    "amplitude": Key("float", 0.02, help="jet or perturbation amplitude"),
    "seed": Key("int", None, help="seed for random jets / perturbations"),
    "base": Key("str", "euclidean", help="base metric for perturbed"),
    "base_K": Key("float", 1.0, help="base curvature for perturbed"),
    "base_chart": Key("str", "normal", help="base chart for perturbed"),
    "radius": Key("float", None, help="perturbation bump radius"),
    "jet_file": Key("str", None, help="path to a serialized metric jet"),
}

BODY_SCHEMA = {
    "name": Key("str", required=True, help="body catalog name"),
    "radius": Key("float", 0.5, help="ball radius"),
    "center": Key("floatlist", None, help="ball center"),
    "z_lo": Key("float", 0.0, help="slab lower face"),
    "z_hi": Key("float", 1.0, help="slab upper face"),
    "axis": Key("int", None, help="slab axis"),
    "delta_mem": Key("float", 1e-6, help="membership band"),
}

TASK_SCHEMAS = {
    "transport-convergence": {
        "randomized": False,
        "needs_metric": True,
        "keys": {
            "start": Key("floatlist", None, help="geodesic start point"),
            "direction": Key("floatlist", None, help="initial velocity"),
            "vector": Key("floatlist", None, help="vector to transport"),
            "a": Key("float", 0.0, help="transport start time"),
            "b": Key("float", 1.0, help="transport end time"),
            "ks": Key("intlist", [8, 16, 32, 64], help="subdivision counts"),
            "max_error": Key("float", None,
                             help="bound on the final scaled error"),
        },
    },
    "jet-check": {
        "randomized": True,
        "needs_metric": False,
        "keys": {
            "m": Key("int", 3, help="dimension"),
            "k": Key("int", 4, help="jet order"),
            "samples": Key("int", 5, help="random round-trip jets"),
        },
    },
    "exceptional-scan": {
        "randomized": False,
        "needs_metric": True,
        "keys": {
            "point": Key("floatlist", None, help="chart point (default origin)"),
            "k": Key("int", 4, help="stack order"),
            "grid": Key("int", 64, help="direction grid size"),
            "refine": Key("bool", True, help="refine the best cells"),
            "expect": Key("str", "any",
                          help="any|all-exceptional|none-exceptional"),
        },
    },
    "geodesic-scan": {
        "randomized": True,
        "needs_metric": True,
        "keys": {
            "count": Key("int", 10, help="number of random geodesics"),
            "k": Key("int", 3, help="stack order for margins"),
            "samples": Key("int", 5, help="samples along each geodesic"),
            "length": Key("float", 0.6, help="geodesic length"),
            "start_box": Key("float", 0.25, help="start sampling half-width"),
            "start": Key("floatlist", None, help="explicit start point"),
            "direction": Key("floatlist", None, help="explicit direction"),
            "expect": Key("str", "any",
                          help="any|exceptional|none-exceptional"),
        },
    },
    "jet-survey": {
        "randomized": True,
        "needs_metric": False,
        "keys": {
            "m": Key("int", 3, help="dimension (3 or 4)"),
            "k": Key("int", 6, help="jet order (<= 6)"),
            "samples": Key("int", 100, help="number of random jets"),
            "grid": Key("int", 64, help="direction grid size"),
            "min_fraction": Key("float", 0.9,
                                help="required fraction above the margin"),
        },
    },
    "hull-iterate": {
        "randomized": True,
        "needs_metric": True,
        "keys": {
            "points": Key("points", None, required=True, help="seed cloud"),
            "rounds": Key("int", 4, help="hull iteration rounds"),
            "density": Key("int", 200, help="pairs per round"),
            "net_h": Key("float", None, help="net resolution"),
            "stable_round": Key("int", None,
                                help="round by which gaps must be <= 2h"),
        },
    },
    "key-lemma-audit": {
        "randomized": False,
        "needs_metric": True,
        "keys": {
            "start": Key("floatlist", None, required=True,
                         help="geodesic start"),
            "direction": Key("floatlist", None, required=True,
                             help="geodesic velocity"),
            "length": Key("float", 1.0, help="geodesic length"),
            "samples": Key("int", 5, help="audit samples"),
            "directions": Key("int", 64, help="cone probe directions"),
            "max_residual": Key("float", 1e-6, help="pass threshold"),
            "expect": Key("str", "pass", help="pass|refuse"),
        },
    },
    "strict-convexity-audit": {
        "randomized": True,
        "needs_metric": True,
        "keys": {
            "samples": Key("int", 40, help="boundary samples"),
            "directions": Key("int", 64, help="probe directions"),
            "expect": Key("str", "any", help="any|strict|flagged"),
        },
    },
}


@dataclass
class RunConfig:
    task: str
    output: str
    seed: int = None
    threads: int = None
    metric: dict = field(default_factory=dict)
    body: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    source_text: str = ""


TOP_KEYS = {
    "task": Key("str", required=True),
    "output": Key("str", "out"),
    "seed": Key("int", None),
    "threads": Key("int", None),
}


def parse_config(text, filename="<config>"):
    sections = {"": {}, "metric": {}, "task": {}, "body": {}}
    lines = {"": {}, "metric": {}, "task": {}, "body": {}}
    current = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith(";"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            if current not in sections:
                raise ConfigError("%s:%d: unknown section [%s]"
                                  % (filename, lineno, current))
            continue
        if "=" not in line:
            raise ConfigError("%s:%d: expected 'key = value', got %r"
                              % (filename, lineno, raw))
        key, _, value = line.partition("=")
        key = key.strip()
        if key in sections[current]:
            raise ConfigError("%s:%d: duplicate key %r" % (filename, lineno, key))
        sections[current][key] = value.strip()
        lines[current][key] = lineno

    def apply_schema(found, schema, section, linemap):
        out = {}
        for key, raw in found.items():
            if key not in schema:
                raise ConfigError("%s:%d: unknown key %r in section [%s]"
                                  % (filename, linemap[key], key, section))
            try:
                out[key] = _parse_scalar(raw, schema[key].kind)
            except ValueError as exc:
                raise ConfigError("%s:%d: bad value for %r: %s"
                                  % (filename, linemap[key], key, exc))
        for key, spec in schema.items():
            if key not in out:
                if spec.required:
                    raise ConfigError("%s: missing required key %r in [%s]"
                                      % (filename, key, section))
                if spec.default is not None:
                    out[key] = spec.default
        return out

    top = apply_schema(sections[""], TOP_KEYS, "", lines[""])
    task = top.get("task")
    if task not in TASK_SCHEMAS:
        raise ConfigError("%s: unknown task %r (known: %s)"
                          % (filename, task, ", ".join(sorted(TASK_SCHEMAS))))
    schema = TASK_SCHEMAS[task]
    params = apply_schema(sections["task"], schema["keys"], "task",
                          lines["task"])
    metric = {}
    if schema["needs_metric"]:
        metric = apply_schema(sections["metric"], METRIC_SCHEMA, "metric",
                              lines["metric"])
    elif sections["metric"]:
        raise ConfigError("%s: task %r takes no [metric] section"
                          % (filename, task))
    body = {}
    if sections["body"]:
        body = apply_schema(sections["body"], BODY_SCHEMA, "body",
                            lines["body"])
    seed = top.get("seed")
    if schema["randomized"] and seed is None:
        raise ConfigError("%s: task %r is randomized and requires a seed"
                          % (filename, task))
    return RunConfig(task=task, output=top.get("output", "out"), seed=seed,
                     threads=top.get("threads"), metric=metric, body=body,
                     params=params, source_text=text)


def build_metric(spec):
    """Metric from a parsed [metric] section."""
    from .metrics import catalog_metric
    from .jets import jet_from_text
    name = spec["name"]
    params = {}
    if name == "euclidean":
        params = {"m": spec.get("m", 3)}
        if spec.get("box_half"):
            params["box_half"] = spec["box_half"]
    elif name == "round-sphere":
        params = {"K": spec.get("K", 1.0), "m": spec.get("m", 2),
                  "chart": spec.get("chart", "normal"),
                  "box_half": spec.get("box_half")}
    elif name == "hyperbolic-ball":
        params = {"m": spec.get("m", 3), "box_half": spec.get("box_half")}
    elif name == "product-sphere-line":
        params = {"K": spec.get("K", 1.0), "m": 3,
                  "box_half": spec.get("box_half"),
                  "z_half": spec.get("z_half")}
    elif name == "revolution-product":
        params = {"c1": spec.get("c1", "-1/6"), "c2": spec.get("c2", "1/60"),
                  "m": spec.get("m", 3), "box_half": spec.get("box_half")}
    elif name == "jet-metric":
        params = {"m": spec.get("m", 3), "k": spec.get("k", 4),
                  "amplitude": spec.get("amplitude", 0.25),
                  "seed": spec.get("seed")}
        if spec.get("box_half"):
            params["box_half"] = spec["box_half"]
        if spec.get("jet_file"):
            with open(spec["jet_file"]) as fh:
                params["jet"] = jet_from_text(fh.read())
    elif name == "perturbed":
        base_params = {"m": spec.get("m", 3)}
        if spec.get("base") == "round-sphere":
            base_params.update({"K": spec.get("base_K", 1.0),
                                "chart": spec.get("base_chart", "normal")})
        params = {"base": spec.get("base", "euclidean"),
                  "base_params": base_params,
                  "seed": spec.get("seed"),
                  "amplitude": spec.get("amplitude", 0.02)}
        if spec.get("radius"):
            params["radius"] = spec["radius"]
    else:
        params = dict(spec)
        params.pop("name", None)
    return catalog_metric(name, params)


def build_body(M, spec):
    from .convex import catalog_body
    params = {k: v for k, v in spec.items() if k != "name"}
    return catalog_body(M, spec["name"], params)
