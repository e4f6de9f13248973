"""
Caching utilities for expensive probe and oracle reports
Entries are JSON files keyed by the md5 of the canonical request
"""

import json
import hashlib
import os
from pathlib import Path
from typing import Dict, List, Optional


# Cache directories
PROBE_CACHE_DIR = Path("cache/probes")


def canonical_json(request: Dict) -> str:
    """Sorted-key compact JSON of a request, the input of the cache key"""
    return json.dumps(request, sort_keys=True, separators=(',', ':'))


def get_cache_key(request: Dict) -> str:
    """Generate cache key from a request dict"""
    return hashlib.md5(canonical_json(request).encode()).hexdigest()


def load_report_from_cache(request: Dict, cache_dir: Path = PROBE_CACHE_DIR) -> Optional[Dict]:
    """Load a cached report for the request if available; unreadable entries count as misses"""
    cache_dir.mkdir(parents=True, exist_ok=True)
    cache_file = cache_dir / f"{get_cache_key(request)}.json"

    if cache_file.exists():
        try:
            with open(cache_file, 'r', encoding='utf-8') as f:
                cached = json.load(f)
            # A colliding or hand-edited entry is not trusted
            if cached.get('request') != json.loads(canonical_json(request)):
                return None
            return cached.get('report')
        except Exception:
            print(f"Warning: ignoring unreadable cache entry {cache_file}")
            return None
    return None


def save_report_to_cache(request: Dict, report: Dict, cache_dir: Path = PROBE_CACHE_DIR):
    """Save a report for the request, replacing any previous entry atomically"""
    cache_dir.mkdir(parents=True, exist_ok=True)
    cache_file = cache_dir / f"{get_cache_key(request)}.json"
    temp_file = cache_file.with_suffix('.json.tmp')

    cache_data = {
        'request': request,
        'report': report
    }

    with open(temp_file, 'w', encoding='utf-8') as f:
        json.dump(cache_data, f, ensure_ascii=False, indent=2, sort_keys=True)
    os.replace(temp_file, cache_file)


def get_all_cached_requests(cache_dir: Path = PROBE_CACHE_DIR) -> List[Dict]:
    """Get all requests that are cached"""
    cache_dir.mkdir(parents=True, exist_ok=True)
    cached_requests = []

    for cache_file in sorted(cache_dir.glob("*.json")):
        try:
            with open(cache_file, 'r', encoding='utf-8') as f:
                cached = json.load(f)
                if 'request' in cached:
                    cached_requests.append(cached['request'])
        except Exception:
            continue

    return cached_requests


def clear_cache(cache_dir: Path = PROBE_CACHE_DIR) -> int:
    """Delete every cached report, returning how many were removed"""
    if not cache_dir.exists():
        return 0
    removed = 0
    for cache_file in cache_dir.glob("*.json"):
        cache_file.unlink()
        removed += 1
    return removed
