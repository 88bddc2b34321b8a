"""
Shared utility functions used across modules.
Includes structured logging, output sinks and seed derivation.
"""
import sys
import json
import time
import logging
from typing import Optional, Dict, Any, Tuple
from datetime import datetime, timezone

from error_handler import OutputError

logger = logging.getLogger(__name__)

# ============================================================================
# SEED UTILITIES
# ============================================================================

MASK64 = (1 << 64) - 1

def splitmix64(x: int) -> int:
    """One SplitMix64 output step on a 64-bit state"""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)

def derive_seed(base: int, *indices: int) -> int:
    """
    Derive a 64-bit seed from a base seed and a sequence of indices.
    Each index is folded in with one SplitMix64 step, so
    derive_seed(s, i, j) == splitmix64(splitmix64(splitmix64(s) ^ i) ^ j).
    """
    state = splitmix64(base & MASK64)
    for index in indices:
        state = splitmix64(state ^ (index & MASK64))
    return state

# ============================================================================
# LOGGING UTILITIES
# ============================================================================

def log_with_context(logger_instance, level: str, message: str,
                     context: Optional[Dict] = None, **kwargs):
    """
    Structured logging with context.
    Usage: log_with_context(logger, 'info', 'Bisection step', {'lo': 0.9, 'hi': 1.0})
    """
    log_method = getattr(logger_instance, level.lower(), logger_instance.info)
    if not logger_instance.isEnabledFor(getattr(logging, level.upper(), logging.INFO)):
        return
    log_data = {
        'message': message,
        'timestamp': datetime.now(timezone.utc).isoformat(),
        **(context or {}),
        **kwargs
    }
    log_method(json.dumps(log_data, default=str))

def configure_logging(level: str = 'WARNING') -> None:
    """Send log records to stderr so stdout stays reserved for data"""
    logging.basicConfig(
        stream=sys.stderr,
        level=getattr(logging, str(level).upper(), logging.WARNING),
        format='%(asctime)s %(levelname)s %(name)s %(message)s',
        force=True,
    )

# ============================================================================
# RETRY UTILITIES
# ============================================================================

def retry_with_backoff(func, max_retries: int = 3, initial_delay: float = 1.0,
                      backoff_factor: float = 2.0, exceptions: tuple = (Exception,)):
    """
    Retry function with exponential backoff.

    Usage:
        result = retry_with_backoff(
            lambda: s3.put_object(...),
            max_retries=3,
            exceptions=(ClientError,)
        )
    """
    delay = initial_delay
    last_exception = None

    for attempt in range(max_retries):
        try:
            return func()
        except exceptions as e:
            last_exception = e
            if attempt < max_retries - 1:
                logger.warning("Attempt %d failed: %s. Retrying in %ss...", attempt + 1, e, delay)
                time.sleep(delay)
                delay *= backoff_factor
            else:
                logger.error("All %d attempts failed", max_retries)

    raise last_exception

# ============================================================================
# OUTPUT SINKS
# ============================================================================

def parse_s3_uri(uri: str) -> Tuple[str, str]:
    """Split s3://bucket/key into (bucket, key)"""
    rest = uri[len('s3://'):]
    bucket, _, key = rest.partition('/')
    if not bucket or not key:
        raise OutputError("S3 destination must look like s3://bucket/key", details={'uri': uri})
    return bucket, key

def _upload_to_s3(text: str, uri: str) -> None:
    import boto3
    from botocore.exceptions import BotoCoreError, ClientError

    bucket, key = parse_s3_uri(uri)
    content_type = 'application/json' if key.endswith('.json') else 'text/csv' if key.endswith('.csv') else 'text/plain'
    s3 = boto3.client('s3')
    try:
        retry_with_backoff(
            lambda: s3.put_object(Bucket=bucket, Key=key, Body=text.encode('utf-8'), ContentType=content_type),
            exceptions=(ClientError, BotoCoreError),
        )
    except (ClientError, BotoCoreError) as e:
        raise OutputError("Failed to upload results to S3", details={'uri': uri, 'error': str(e)})
    logger.info("Uploaded %d bytes to %s", len(text), uri)

def write_output(text: str, out: Optional[str] = None) -> None:
    """
    Write text to stdout (out is None or '-'), a local file, or an s3:// URI.
    """
    if out is None or out == '-':
        sys.stdout.write(text)
        if not text.endswith('\n'):
            sys.stdout.write('\n')
        sys.stdout.flush()
        return
    if out.startswith('s3://'):
        _upload_to_s3(text, out)
        return
    try:
        with open(out, 'w', encoding='utf-8', newline='') as fh:
            fh.write(text)
    except OSError as e:
        raise OutputError("Failed to write output file", details={'path': out, 'error': str(e)})
    logger.info("Wrote %d bytes to %s", len(text), out)
