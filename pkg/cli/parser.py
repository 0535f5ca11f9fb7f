import argparse
import enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Type, TypeVar, get_origin

from dotenv import dotenv_values
from pydantic import BaseModel, ValidationError
from pydantic.fields import FieldInfo

from core.errors import UsageError

M = TypeVar("M", bound=BaseModel)


class CliArgumentParser(argparse.ArgumentParser):
    """argparse, который сообщает об ошибках исключением, а не sys.exit(2)"""

    def error(self, message: str):
        raise UsageError(message=f"{self.prog}: {message}")


def config_key(name: str, field: FieldInfo) -> str:
    """Имя ключа в файле конфигурации: алиас поля, если он задан"""
    return field.alias or name


def flag_name(key: str) -> str:
    return "--" + key.replace("_", "-")


def _is_sequence(field: FieldInfo) -> bool:
    return get_origin(field.annotation) in (list, tuple)


def _format_default(value: Any) -> str:
    if isinstance(value, enum.Enum):
        return str(value.value)
    if isinstance(value, (list, tuple)):
        return ",".join(str(item) for item in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def _cli_fields(model: Type[BaseModel]) -> Iterable[tuple[str, FieldInfo]]:
    for name, field in model.model_fields.items():
        if field.exclude:
            continue
        yield config_key(name, field), field


def add_model_flags(parser: argparse.ArgumentParser, *models: Type[BaseModel]) -> None:
    """
    Флаги из полей pydantic-моделей: имя ключа как есть, `_` → `-`.

    Значения по умолчанию не подставляются в namespace (SUPPRESS), чтобы
    отличать явные флаги от значений из файла. Ключ, общий для нескольких
    моделей (seed), регистрируется один раз и применяется ко всем.
    """
    seen: set[str] = set()
    for model in models:
        group = parser.add_argument_group(model.__name__)
        for key, field in _cli_fields(model):
            if key in seen:
                continue
            seen.add(key)
            description = (field.description or key).replace("%", "%%")
            help_text = f"{description} (default: {_format_default(field.default)})"
            if field.annotation is bool:
                group.add_argument(
                    flag_name(key),
                    dest=key,
                    action=argparse.BooleanOptionalAction,
                    default=argparse.SUPPRESS,
                    help=help_text,
                )
            else:
                group.add_argument(
                    flag_name(key),
                    dest=key,
                    default=argparse.SUPPRESS,
                    metavar="LIST" if _is_sequence(field) else "VALUE",
                    help=help_text,
                )


def known_keys(*models: Type[BaseModel]) -> set[str]:
    return {key for model in models for key, _ in _cli_fields(model)}


def read_config_file(path: Path, *models: Type[BaseModel]) -> Dict[str, str]:
    """Плоский файл key=value; неизвестные ключи - ошибка использования"""
    if not Path(path).is_file():
        raise UsageError(message=f"Config file not found: {path}")
    values = {key: value for key, value in dotenv_values(path).items() if value is not None}
    unknown = sorted(set(values) - known_keys(*models))
    if unknown:
        raise UsageError(
            message=f"Unknown config keys in {path}: {', '.join(unknown)}",
            details={"unknown": unknown},
        )
    return values


def build_model(model: Type[M], values: Mapping[str, Any]) -> M:
    """Собирает модель из строковых значений (файл) и значений флагов"""
    data: Dict[str, Any] = {}
    for key, field in _cli_fields(model):
        if key not in values:
            continue
        value = values[key]
        if _is_sequence(field) and isinstance(value, str):
            value = [item.strip() for item in value.split(",") if item.strip()]
        data[key] = value
    try:
        return model.model_validate(data)
    except ValidationError as e:
        raise UsageError(
            message=f"Invalid {model.__name__}: {_first_error(e)}",
            details=e.errors(include_url=False, include_context=False),
        ) from e


def _first_error(error: ValidationError) -> str:
    first = error.errors()[0]
    location = ".".join(str(part) for part in first["loc"])
    return f"{location}: {first['msg']}" if location else first["msg"]


def collect_values(
    namespace: argparse.Namespace, models: List[Type[BaseModel]]
) -> Dict[str, Any]:
    """Приоритет: значения по умолчанию < файл --config < флаги"""
    values: Dict[str, Any] = {}
    config_path = getattr(namespace, "config", None)
    if config_path is not None:
        values.update(read_config_file(config_path, *models))
    flags = vars(namespace)
    values.update({key: flags[key] for key in known_keys(*models) if key in flags})
    return values
