"""Batch command line: `riemlab run <config>` and `riemlab list-tasks`.

Exit codes: 0 when every verdict passed, 1 when a verdict failed, 2 on
usage or configuration errors (with line diagnostics).
"""

from __future__ import annotations

import argparse
import sys

from .config import (BODY_SCHEMA, METRIC_SCHEMA, TASK_SCHEMAS, TOP_KEYS,
                     ConfigError, parse_config)


def _schema_lines(name, schema):
    lines = []
    for key in sorted(schema):
        spec = schema[key]
        req = " (required)" if spec.required else ""
        default = "" if spec.default is None else " [default %s]" % (spec.default,)
        lines.append("    %-14s %-9s%s%s  %s"
                     % (key, spec.kind, req, default, spec.help))
    return lines


def list_tasks(stream=sys.stdout):
    out = []
    out.append("tasks (%d):" % len(TASK_SCHEMAS))
    for name in sorted(TASK_SCHEMAS):
        schema = TASK_SCHEMAS[name]
        flags = []
        if schema["randomized"]:
            flags.append("seed required")
        if schema["needs_metric"]:
            flags.append("[metric] section")
        out.append("")
        out.append("%s%s" % (name, (" -- " + ", ".join(flags)) if flags else ""))
        out.extend(_schema_lines(name, schema["keys"]))
    out.append("")
    out.append("top-level keys:")
    out.extend(_schema_lines("", TOP_KEYS))
    out.append("")
    out.append("[metric] keys:")
    out.extend(_schema_lines("metric", METRIC_SCHEMA))
    out.append("")
    out.append("[body] keys:")
    out.extend(_schema_lines("body", BODY_SCHEMA))
    stream.write("\n".join(out) + "\n")


def run(config_path, stream=sys.stdout):
    from .tasks import run_task, write_artifacts
    try:
        with open(config_path) as fh:
            text = fh.read()
    except OSError as exc:
        stream.write("error: %s\n" % exc)
        return 2
    try:
        cfg = parse_config(text, filename=config_path)
        result = run_task(cfg)
    except ConfigError as exc:
        stream.write("config error: %s\n" % exc)
        return 2
    write_artifacts(cfg, result, cfg.output)
    verdict = result.summary.get("verdict", "pass" if result.passed else "fail")
    stream.write("%s: %s (artifacts in %s)\n" % (cfg.task, verdict, cfg.output))
    return 0 if result.passed else 1


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="riemlab",
        description="batch verification suites for chart-manifold geometry")
    sub = parser.add_subparsers(dest="command")
    runp = sub.add_parser("run", help="run a task from a config file")
    runp.add_argument("config", help="path to the config file")
    sub.add_parser("list-tasks", help="print the task catalog and schemas")
    args = parser.parse_args(argv)
    if args.command == "run":
        return run(args.config)
    if args.command == "list-tasks":
        list_tasks()
        return 0
    parser.print_help()
    return 2


if __name__ == "__main__":
    sys.exit(main())
