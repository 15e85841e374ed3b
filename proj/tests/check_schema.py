"""Validates the example configurations against docs/config.schema.json.

Also checks that known-bad documents are rejected. Exits 77 (skip) when the
jsonschema package is not installed.
"""

import copy
import json
import pathlib
import sys

try:
    import jsonschema
except ImportError:
    print("jsonschema not installed; skipping")
    sys.exit(77)


def main(root: pathlib.Path) -> int:
    schema = json.loads((root / "docs" / "config.schema.json").read_text())
    validator = jsonschema.Draft202012Validator(schema)
    validator.check_schema(schema)
    failures = 0
    examples = sorted((root / "docs" / "examples").glob("*.json"))
    if not examples:
        print("no example configurations found")
        return 1
    for path in examples:
        errors = list(validator.iter_errors(json.loads(path.read_text())))
        for e in errors:
            print(f"FAIL {path.name}: /{'/'.join(map(str, e.path))}: {e.message}")
        failures += bool(errors)
        if not errors:
            print(f"ok   {path.name}")

    base = json.loads((root / "docs" / "examples" / "sdof_b_ei.json").read_text())
    bad_cases = {
        "unknown top-level key": lambda d: d.update(colour="red"),
        "negative budget": lambda d: d.update(budget=-1),
        "chi without cb": lambda d: d["af"].update(chi=2.0),
        "builtin and command": lambda d: d["model"].update(command="x"),
        "zero reference": lambda d: d["reference"].update(lower=0),
        "missing q": lambda d: d["initial_design"].pop("q"),
        "unknown grid type": lambda d: d["grid"].update(type="sobol"),
    }
    for name, mutate in bad_cases.items():
        doc = copy.deepcopy(base)
        mutate(doc)
        if validator.is_valid(doc):
            print(f"FAIL accepted bad document: {name}")
            failures += 1
        else:
            print(f"ok   rejects {name}")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main(pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else ".")))
