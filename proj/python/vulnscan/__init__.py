# Copyright 2026 The vulnscan Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#  http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Match installed software against known CVEs.

PVC records and inventories are plain dicts with the same keys as the JSON
inventory files (``kind``, ``name``, ``publisher``, ``display_version`` ...).
"""

import json

from . import _vulnscan
from ._vulnscan import IngestError, InventoryError, canonical_cpe, compute_accuracy, cpe_matches, normalize_token

__all__ = [
    "Database",
    "IngestError",
    "InventoryError",
    "canonical_cpe",
    "compute_accuracy",
    "cpe_matches",
    "fingerprint",
    "generate_cpes",
    "normalize_token",
]


def generate_cpes(pvc, dictionary=()):
    """Candidate CPE 2.2 URIs for one PVC, optionally guided by a CPE dictionary."""
    return _vulnscan.generate_cpes(json.dumps(pvc), list(dictionary))


def fingerprint(pvc):
    """Hex SHA-256 cache key of a PVC."""
    return _vulnscan.fingerprint(json.dumps(pvc))


class Database:
    """A vulnerability database, in memory by default."""

    def __init__(self, path=":memory:", concurrency=4):
        self._db = _vulnscan.Database(str(path), concurrency)

    def update(self, directory):
        """Ingest every feed, dictionary and exploit map in a directory."""
        return self._db.update(str(directory))

    def match(self, cpes):
        return self._db.match(list(cpes))

    def generate(self, pvc):
        return self._db.generate(json.dumps(pvc))

    def scan(self, inventory, token="local"):
        if isinstance(inventory, list):
            inventory = {"pvcs": inventory}
        return json.loads(self._db.scan(json.dumps(inventory), token))

    @property
    def generation(self):
        return self._db.generation

    @property
    def cve_count(self):
        return self._db.cve_count
