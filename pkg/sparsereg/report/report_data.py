import os
import shutil
import tempfile
from typing import Dict, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import pandas as pd
from loguru import logger

from sparsereg.errors import ConfigError
from sparsereg.utils import create_path, dump_json, lines_text, sha256_text, to_tsv
import sparsereg.strs as strs

MANIFEST_FILE = 'manifest.json'


@dataclass
class ReportTree:
    """In-memory report directory: relative path -> file text.

    Nothing touches the disk until `save`, which writes the whole tree
    or nothing.
    """
    files: Dict[str, str] = field(default_factory=dict)

    def add(self, rel_path: str, text: str):
        if not text.endswith('\n'):
            text += '\n'
        if rel_path == MANIFEST_FILE:
            raise ValueError(f'{MANIFEST_FILE} is reserved for the manifest')
        self.files[rel_path] = text

    def add_table(self, rel_path: str, frame: pd.DataFrame):
        self.add(rel_path, to_tsv(frame))

    def add_json(self, rel_path: str, data):
        self.add(rel_path, dump_json(data))

    def add_lines(self, rel_path: str, items: Sequence[str]):
        self.files[rel_path] = lines_text(items)

    def manifest(self) -> Dict[str, str]:
        return {p: sha256_text(self.files[p]) for p in sorted(self.files)}

    def save(self, output_directory: Path, overwrite: bool = False) -> Dict[str, str]:
        """Write every file plus manifest.json under `output_directory`.

        Files go to a sibling temporary directory that is renamed into place
        once complete, so a failure leaves no partial report behind.
        """
        output_directory = Path(output_directory)
        if output_directory.exists() and not overwrite:
            raise ConfigError(f'Output directory {output_directory} exists; pass overwrite to replace it')
        parent = output_directory.parent
        create_path(parent)
        manifest = self.manifest()
        staging = Path(tempfile.mkdtemp(prefix=f'.{output_directory.name}.', dir=parent))
        try:
            for rel_path, text in self.files.items():
                o_path = Path(staging, rel_path)
                create_path(o_path.parent)
                with open(o_path, 'w', encoding='utf-8', newline='\n') as f:
                    f.write(text)
            with open(Path(staging, MANIFEST_FILE), 'w', encoding='utf-8', newline='\n') as f:
                f.write(dump_json({strs.MANIFEST: manifest}))
            if output_directory.exists():
                retired = Path(tempfile.mkdtemp(prefix=f'.{output_directory.name}.old.', dir=parent))
                os.replace(output_directory, Path(retired, 'tree'))
                os.replace(staging, output_directory)
                shutil.rmtree(retired, ignore_errors=True)
            else:
                os.replace(staging, output_directory)
        except BaseException:
            shutil.rmtree(staging, ignore_errors=True)
            raise
        logger.debug(f'Wrote {len(manifest)} report files to {output_directory}')
        return manifest
