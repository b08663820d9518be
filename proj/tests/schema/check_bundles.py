"""Validate pipeline bundles against the published JSON Schema.

Usage: check_bundles.py CLI SCHEMA WORKDIR

The manifest schema is expected next to SCHEMA as manifest.schema.json.

Generates a small synthetic dataset with the CLI, runs the pipeline for every
variant and filter (plus bootstrap errors for a few cells and a percentile
run), and validates each bundle and the manifest's references.
"""

import json
import pathlib
import shutil
import subprocess
import sys

import jsonschema


def run(cmd):
    result = subprocess.run(cmd, capture_output=True, text=True)
    if result.returncode != 0:
        sys.exit(f"command failed ({result.returncode}): {' '.join(cmd)}\n{result.stderr}")


def main():
    cli, schema_path, workdir = sys.argv[1], pathlib.Path(sys.argv[2]), pathlib.Path(sys.argv[3])
    shutil.rmtree(workdir, ignore_errors=True)
    data = workdir / "data"
    run([cli, "synth", "--states", "4", "--households", "80", "--out", str(data)])

    outs = {
        "decile": [],
        "percentile": ["--scheme", "percentile", "--benchmark-mode", "ranking", "--variant", "ERHHRPP",
                       "--filter", "all", "--bootstrap-seed", "3", "--bootstrap-replicates", "20",
                       "--bootstrap-years", "1976", "2019"],
        "resample": ["--age-mode", "resample", "--age-seed", "9", "--variant", "RHH", "--filter", "female+edu-gt12"],
    }
    schema = json.loads(schema_path.read_text())
    jsonschema.Draft202012Validator.check_schema(schema)
    validator = jsonschema.Draft202012Validator(schema)
    manifest_schema = json.loads((schema_path.parent / "manifest.schema.json").read_text())
    manifest_validator = jsonschema.Draft202012Validator(manifest_schema)

    checked = 0
    for name, extra in outs.items():
        out = workdir / name
        run([cli, "pipeline", "--data", str(data), "--out", str(out)] + extra)
        manifest = json.loads((out / "manifest.json").read_text())
        manifest_validator.validate(manifest)
        for entry in manifest["bundles"]:
            path = out / entry["file"]
            doc = json.loads(path.read_text())
            errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.path))
            if errors:
                first = errors[0]
                sys.exit(f"{path}: {len(errors)} schema error(s); first at {list(first.path)}: {first.message}")
            if doc["metadata"]["variant"] != entry["variant"] or doc["metadata"]["filter"] != entry["filter"]:
                sys.exit(f"{path}: manifest entry does not match bundle metadata")
            checked += 1

    expected = 36 + 1 + 1
    if checked != expected:
        sys.exit(f"validated {checked} bundles, expected {expected}")
    print(f"{checked} bundles valid against {schema_path.name}")


if __name__ == "__main__":
    main()
