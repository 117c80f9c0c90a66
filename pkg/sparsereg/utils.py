from typing import Optional, Sequence
import hashlib
import json
import os
import sys
import time

from pathlib import Path

import numpy as np
import pandas as pd
from loguru import logger

from sparsereg.errors import ConfigError

NO_COLOR_ENV = 'SPARSEREG_NO_COLOR'


def configure_logging(verbose: bool = False, no_color: bool = False):
    """Install the single stderr sink used by the command line tools.

    Colouring is off when `no_color` is set or the SPARSEREG_NO_COLOR
    environment variable holds any non-empty value.
    """
    colorize = not (no_color or os.environ.get(NO_COLOR_ENV))
    logger.remove()
    logger.add(sys.stderr,
               level='DEBUG' if verbose else 'INFO',
               colorize=colorize,
               format='<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | {message}')


def read_json(path: Path) -> dict:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return json.load(f)
    except FileNotFoundError:
        raise ConfigError(f'JSON document not found: {path}')
    except json.JSONDecodeError as e:
        raise ConfigError(f'Invalid JSON in {path}: {e.msg} (line {e.lineno})')


def dump_json(data) -> str:
    return json.dumps(data, indent=4, sort_keys=False) + '\n'


def write_text(path: Path, text: str):
    if not text.endswith('\n'):
        text += '\n'
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(text)


def write_json(path: Path, data):
    write_text(path, dump_json(data))


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


def create_path(path: Path):
    if not path.exists():
        os.makedirs(path)


def fmt(value) -> str:
    """Six significant digits in positional notation; integers and strings pass through."""
    if value is None:
        return 'NA'
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if np.isnan(v):
            return 'NA'
        if v == 0.0:
            # avoids '-0'
            return '0'
        return np.format_float_positional(v, precision=6, unique=False, fractional=False, trim='-')
    return str(value)


def to_tsv(frame: pd.DataFrame) -> str:
    lines = ['\t'.join(str(c) for c in frame.columns)]
    for row in frame.itertuples(index=False):
        lines.append('\t'.join(fmt(v) for v in row))
    return '\n'.join(lines) + '\n'


def write_tsv(path: Path, frame: pd.DataFrame):
    write_text(path, to_tsv(frame))


def lines_text(items: Sequence[str]) -> str:
    return ''.join(f'{i}\n' for i in items)


class SimpleLogger:
    """Nested, timed progress messages.

    Every `msg` at a timed level opens a section that the matching
    `end_msg` closes with its elapsed time.
    """
    ptrn = '/*\\*/'  # separator pattern

    def __init__(self, quiet: bool = False):
        self.level_messages = dict()
        self.current_head = None
        self.current_level = None
        self.root = None
        self.quiet = quiet

    def msg(self, message: str, level=1, timed=True):
        if timed:
            if self.root is None:
                self.root = message
                self.current_level = level
                self.current_head = message
                msg_full_path = message
            else:
                msg_full_path = self.get_msg_path(message, level)
            t = Time()
            t.start(message)
            self.current_level = level
            self.current_head = msg_full_path
            self.level_messages[self.current_head] = (message, level, t)

        if level < 3 or not timed:
            self._emit(self._indent(level) + ' ' + message)

    def end_msg(self):
        if self.current_head not in self.level_messages:
            return
        message, level, t = self.level_messages.pop(self.current_head)
        if self.current_head != self.root:
            parent_path = self.ptrn.join(self.current_head.split(self.ptrn)[:-1])
            self.current_head = parent_path
            self.current_level = level - 1
        else:
            self.root = None
            self.current_head = None
        secs = t.time()
        self._emit(self._indent(level) + f' >>>> Finished {message} | Time: {round(secs, 1)}s <<<<')

    def get_msg_path(self, msg, level):
        if self.current_level == level and self.current_head != self.root:
            parent_path = self.ptrn.join(self.current_head.split(self.ptrn)[:-1])
            return parent_path + self.ptrn + msg
        return self.current_head + self.ptrn + msg

    @staticmethod
    def _indent(level: int) -> str:
        return '|' + ''.join(['--' for _ in range(level)])

    def _emit(self, text: str):
        if not self.quiet:
            logger.info(text)


class Time:
    def __init__(self):
        self.labels = dict()
        self.last_label: Optional[str] = None

    def start(self, label: str):
        self.last_label = label
        self.labels[label] = time.perf_counter()

    def time(self) -> float:
        if not self.last_label:
            logger.warning('sparsereg.utils.Time.time() called before start()')
            return 0.0
        start = self.labels[self.last_label]
        end = time.perf_counter() - start
        self.labels[self.last_label] = end
        return end
