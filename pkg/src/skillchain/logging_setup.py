# src/skillchain/logging_setup.py
import logging
from pathlib import Path
from typing import Optional, Union

FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(level: Union[int, str] = logging.INFO, log_dir: Optional[Path] = None) -> None:
    root = logging.getLogger("skillchain")
    root.setLevel(level)
    for h in list(root.handlers):
        root.removeHandler(h)

    console = logging.StreamHandler()
    console.setFormatter(logging.Formatter("%(message)s"))
    root.addHandler(console)

    if log_dir is not None:
        log_dir = Path(log_dir)
        log_dir.mkdir(parents=True, exist_ok=True)
        fh = logging.FileHandler(log_dir / "run.log", encoding="utf-8")
        fh.setFormatter(logging.Formatter(FORMAT))
        root.addHandler(fh)


def progress_enabled() -> bool:
    return logging.getLogger("skillchain").getEffectiveLevel() <= logging.INFO
