import json
import sys
from pathlib import Path
from typing import TypeVar

from pydantic import BaseModel, ValidationError

from app.core.exceptions import InputError

Schema = TypeVar("Schema", bound=BaseModel)


def read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}")


def load_document(path: str, schema: type[Schema]) -> Schema:
    """Parse a JSON file into ``schema``; errors name the line or the offending field."""
    text = read_text(path)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}")
    try:
        return schema.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(part) for part in first["loc"]) or "<root>"
        raise InputError(f"{path}: field {where}: {first['msg']}")


def render(report: BaseModel | dict) -> str:
    if isinstance(report, BaseModel):
        return report.model_dump_json(indent=2, exclude_none=True) + "\n"
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def write_report(report: BaseModel | dict, out: str | None = None) -> None:
    text = render(report)
    if out is None or out == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        Path(out).write_text(text, encoding="utf-8")
