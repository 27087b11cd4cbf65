"""External-service clients and their deterministic test doubles.

Two backend roles exist: a chat judge answering yes/no about chunk pairs,
and an ICD-10 code predictor returning a logit per vocabulary code. Each
role has a remote HTTP client plus doubles that run with no network:
a rule-based oracle / hash stub, and a replay client that serves recorded
responses keyed by the hash of the filled prompt.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

from .errors import BackendError, InputError, ProtocolError
from .lexicon import DEFAULT_CLINICAL_LEXICON, DEFAULT_ICD_VOCABULARY, load_lexicon
from .textcore import tokenize

__all__ = [
    "RetryPolicy",
    "remote_judge_call",
    "oracle_judge",
    "stub_icd_predict",
    "RemoteChatJudge",
    "DeterministicOracleJudge",
    "ReplayJudge",
    "RemoteHttpIcd",
    "DeterministicStubIcd",
    "serve_stub_icd",
    "CodePrediction",
    "BackendConfig",
    "load_backend_config",
    "prompt_key",
]

_RETRYABLE_STATUSES = frozenset({429, 500, 502, 503, 504})


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    backoff_base: float = 0.5  # seconds; delay = base * attempt, non-decreasing

    def delay(self, attempt: int, retry_after: Optional[float] = None) -> float:
        computed = self.backoff_base * attempt
        if retry_after is not None:
            return max(computed, retry_after)
        return computed


@dataclass(frozen=True)
class CodePrediction:
    code: str
    logit: float


def _post_with_retry(
    endpoint: str,
    body: bytes,
    headers: dict,
    policy: RetryPolicy,
    timeout: float,
    sleep: Callable[[float], None],
    what: str,
) -> str:
    """POST and return the response body text.

    Transport failures and retryable statuses (429 and 5xx) are retried up
    to policy.max_attempts with non-decreasing backoff, honoring Retry-After.
    Other non-success statuses raise ProtocolError immediately; exhausted
    retries raise BackendError.
    """
    last_failure = "no attempt made"
    for attempt in range(1, policy.max_attempts + 1):
        try:
            req = urllib.request.Request(endpoint, data=body, headers=headers, method="POST")
            with urllib.request.urlopen(req, timeout=timeout) as resp:
                return resp.read().decode("utf-8")
        except urllib.error.HTTPError as exc:
            if exc.code not in _RETRYABLE_STATUSES:
                raise ProtocolError(f"{what} returned status {exc.code}") from None
            retry_after = None
            raw = exc.headers.get("Retry-After") if exc.headers else None
            if raw is not None:
                try:
                    retry_after = float(raw)
                except ValueError:
                    retry_after = None
            last_failure = f"status {exc.code}"
            exc.close()
            if attempt < policy.max_attempts:
                sleep(policy.delay(attempt, retry_after))
        except (urllib.error.URLError, OSError) as exc:
            last_failure = str(exc)
            if attempt < policy.max_attempts:
                sleep(policy.delay(attempt))
    raise BackendError(f"{what} failed after {policy.max_attempts} attempts ({last_failure})")


def remote_judge_call(
    prompt: str,
    endpoint: str,
    *,
    policy: RetryPolicy = RetryPolicy(),
    model: str = "",
    api_key: Optional[str] = None,
    extra_params: Optional[dict] = None,
    timeout: float = 60.0,
    sleep: Callable[[float], None] = time.sleep,
) -> str:
    """Send the filled prompt as a single-turn message; the reply body text
    is the judge's answer."""
    payload: dict = {"prompt": prompt}
    if model:
        payload["model"] = model
    if extra_params:
        payload.update(extra_params)
    headers = {"Content-Type": "application/json"}
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    return _post_with_retry(
        endpoint,
        json.dumps(payload).encode("utf-8"),
        headers,
        policy,
        timeout,
        sleep,
        "judge endpoint",
    )


_NUMERIC_RE = re.compile(r"\d+")


def oracle_judge(
    original_chunk: Sequence[str],
    deid_chunk: Sequence[str],
    lexicon: frozenset[str] = DEFAULT_CLINICAL_LEXICON,
    pii_tags: frozenset[str] = frozenset(),
) -> str:
    """Deterministic stand-in for the LLM judge.

    Answers "yes" when a clinical-lexicon token or a numeric token from the
    original chunk is missing or changed on the de-identified side; tokens in
    pii_tags (known surrogate values, casefolded) are exempt, so identifier
    replacements alone answer "no".
    """

    def counted(tokens: Sequence[str], keep: Callable[[str], bool]) -> dict[str, int]:
        out: dict[str, int] = {}
        for t in tokens:
            key = t.casefold()
            if key in pii_tags:
                continue
            if keep(key):
                out[key] = out.get(key, 0) + 1
        return out

    def is_clinical(key: str) -> bool:
        return key in lexicon

    def is_numeric(key: str) -> bool:
        return bool(_NUMERIC_RE.fullmatch(key))

    for keep in (is_clinical, is_numeric):
        orig_counts = counted(original_chunk, keep)
        deid_counts = counted(deid_chunk, keep)
        for key, n in orig_counts.items():
            if deid_counts.get(key, 0) < n:
                return "yes"
    return "no"


def stub_icd_predict(
    text: str,
    vocabulary: Sequence[str] = DEFAULT_ICD_VOCABULARY,
    seed: int = 0,
    lexicon: frozenset[str] = DEFAULT_CLINICAL_LEXICON,
) -> list[CodePrediction]:
    """Hash-based code predictor double.

    The logit for each code is a deterministic hash of the casefolded
    multiset of clinical-lexicon tokens in the text, mapped to [-4, 4], so
    edits to non-lexicon tokens (names, dates) leave every logit unchanged.
    An empty clinical multiset yields all-zero logits.
    """
    clinical = sorted(t.text.casefold() for t in tokenize(text) if t.text.casefold() in lexicon)
    if not clinical:
        return [CodePrediction(code, 0.0) for code in vocabulary]
    fingerprint = "\x1f".join(clinical)
    out = []
    for code in vocabulary:
        digest = hashlib.sha256(f"{seed}|{code}|{fingerprint}".encode("utf-8")).digest()
        unit = int.from_bytes(digest[:8], "big") / 2**64
        out.append(CodePrediction(code, unit * 8.0 - 4.0))
    return out


def prompt_key(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


def load_pii_tags(path: str | Path) -> set[str]:
    """Casefolded tokens of every surrogate value listed in the file.

    One value per line (e.g. the final_text fields of the replacement-map
    sidecars); multi-token values like phone numbers contribute each token.
    """
    source = Path(path)
    if not source.exists():
        raise InputError(f"pii tags file not found: {source}")
    tags: set[str] = set()
    for line in source.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        for token in tokenize(line):
            tags.add(token.text.casefold())
    return tags


# ---------------------------------------------------------------------------
# judge backends


class RemoteChatJudge:
    """Single-turn chat client: filled prompt in, plain-text reply out."""

    def __init__(
        self,
        endpoint: str,
        *,
        model: str = "",
        api_key: Optional[str] = None,
        policy: RetryPolicy = RetryPolicy(),
        extra_params: Optional[dict] = None,
        max_in_flight: int = 4,
        timeout: float = 60.0,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key
        self.policy = policy
        self.extra_params = dict(extra_params or {})
        self.timeout = timeout
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(max_in_flight)

    def judge(self, prompt: str, original_tokens, deid_tokens) -> str:
        with self._slots:
            return remote_judge_call(
                prompt,
                self.endpoint,
                policy=self.policy,
                model=self.model,
                api_key=self.api_key,
                extra_params=self.extra_params,
                timeout=self.timeout,
                sleep=self._sleep,
            )


class DeterministicOracleJudge:
    """Applies oracle_judge; pure function of its inputs."""

    def __init__(
        self,
        lexicon: frozenset[str] = DEFAULT_CLINICAL_LEXICON,
        pii_tags: frozenset[str] = frozenset(),
    ):
        self.lexicon = lexicon
        self.pii_tags = frozenset(t.casefold() for t in pii_tags)
        self.policy = RetryPolicy(max_attempts=1, backoff_base=0.0)

    def judge(self, prompt: str, original_tokens, deid_tokens) -> str:
        return oracle_judge(original_tokens, deid_tokens, self.lexicon, self.pii_tags)


class ReplayJudge:
    """Serves recorded responses keyed by sha256 of the filled prompt.

    With record=True and a fallback backend, unseen prompts are forwarded
    once and the reply is persisted; otherwise an unseen prompt is an error,
    so a replay run can never touch the network.
    """

    def __init__(self, fixture_path: str | Path, *, fallback=None, record: bool = False):
        self.fixture_path = Path(fixture_path)
        self.fallback = fallback
        self.record = record
        self.policy = RetryPolicy(max_attempts=1, backoff_base=0.0)
        self._lock = threading.Lock()
        if self.fixture_path.exists():
            self._responses: dict[str, str] = json.loads(
                self.fixture_path.read_text(encoding="utf-8")
            )
        else:
            self._responses = {}

    def judge(self, prompt: str, original_tokens, deid_tokens) -> str:
        key = prompt_key(prompt)
        with self._lock:
            if key in self._responses:
                return self._responses[key]
        if self.record and self.fallback is not None:
            response = self.fallback.judge(prompt, original_tokens, deid_tokens)
            with self._lock:
                self._responses[key] = response
                self.fixture_path.parent.mkdir(parents=True, exist_ok=True)
                self.fixture_path.write_text(
                    json.dumps(self._responses, indent=2, sort_keys=True), encoding="utf-8"
                )
            return response
        raise BackendError(f"replay fixture {self.fixture_path} has no entry for prompt {key[:12]}…")


# ---------------------------------------------------------------------------
# ICD backends


class RemoteHttpIcd:
    """POST {"text": ...} -> {"codes": [...], "logits": [...]}."""

    def __init__(
        self,
        endpoint: str,
        *,
        policy: RetryPolicy = RetryPolicy(),
        timeout: float = 60.0,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.endpoint = endpoint
        self.policy = policy
        self.timeout = timeout
        self._sleep = sleep

    def predict(self, text: str) -> list[CodePrediction]:
        audit = hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]
        try:
            raw = _post_with_retry(
                self.endpoint,
                json.dumps({"text": text}).encode("utf-8"),
                {"Content-Type": "application/json"},
                self.policy,
                self.timeout,
                self._sleep,
                f"ICD endpoint (text {audit})",
            )
        except (BackendError, ProtocolError):
            raise
        try:
            payload = json.loads(raw)
            codes = payload["codes"]
            logits = payload["logits"]
        except (json.JSONDecodeError, KeyError, TypeError):
            raise ProtocolError(f"ICD endpoint sent malformed payload (text {audit})") from None
        if len(codes) != len(logits):
            raise ProtocolError(f"ICD endpoint codes/logits length mismatch (text {audit})")
        return [CodePrediction(str(c), float(v)) for c, v in zip(codes, logits)]


class DeterministicStubIcd:
    def __init__(
        self,
        vocabulary: Sequence[str] = DEFAULT_ICD_VOCABULARY,
        seed: int = 0,
        lexicon: frozenset[str] = DEFAULT_CLINICAL_LEXICON,
    ):
        self.vocabulary = tuple(vocabulary)
        self.seed = seed
        self.lexicon = lexicon

    def predict(self, text: str) -> list[CodePrediction]:
        return stub_icd_predict(text, self.vocabulary, self.seed, self.lexicon)


def serve_stub_icd(
    vocabulary: Sequence[str] = DEFAULT_ICD_VOCABULARY,
    seed: int = 0,
    port: int = 0,
    bind: str = "127.0.0.1",
):
    """Reference HTTP server wrapping the deterministic stub predictor.

    Returns a started ThreadingHTTPServer (its .server_address carries the
    chosen port); callers shut it down with .shutdown(). Exists so the remote
    wire protocol can be exercised in tests without a trained model.
    """
    from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

    stub = DeterministicStubIcd(vocabulary, seed)

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            length = int(self.headers.get("Content-Length", 0))
            try:
                payload = json.loads(self.rfile.read(length).decode("utf-8"))
                text = payload["text"]
            except (json.JSONDecodeError, KeyError):
                self.send_response(400)
                self.end_headers()
                return
            predictions = stub.predict(text)
            body = json.dumps(
                {
                    "codes": [p.code for p in predictions],
                    "logits": [p.logit for p in predictions],
                }
            ).encode("utf-8")
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def log_message(self, *args):
            pass

    server = ThreadingHTTPServer((bind, port), Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server


# ---------------------------------------------------------------------------
# configuration file


@dataclass
class BackendConfig:
    """Parsed backend declaration; see docs/backends.md for the file format."""

    judge_kind: str = "oracle"  # oracle | remote-chat | replay
    judge_endpoint: str = ""
    judge_model: str = ""
    judge_credential_env: str = ""
    judge_fixture: str = ""
    judge_lexicon_path: str = ""
    judge_pii_tags: tuple[str, ...] = ()
    judge_pii_tags_file: str = ""  # one surrogate value per line, tokenized
    judge_max_attempts: int = 3
    judge_backoff_base: float = 0.5
    judge_max_in_flight: int = 4
    judge_params: dict = field(default_factory=dict)  # opaque decoding passthrough
    icd_kind: str = "stub"  # stub | remote-http
    icd_endpoint: str = ""
    icd_vocabulary: tuple[str, ...] = DEFAULT_ICD_VOCABULARY
    icd_seed: int = 0

    def judge_policy(self) -> RetryPolicy:
        return RetryPolicy(self.judge_max_attempts, self.judge_backoff_base)

    def build_judge(self, get_env=None):
        import os

        get_env = get_env or os.environ.get
        lexicon = (
            load_lexicon(self.judge_lexicon_path)
            if self.judge_lexicon_path
            else DEFAULT_CLINICAL_LEXICON
        )
        if self.judge_kind == "oracle":
            tags = set(self.judge_pii_tags)
            if self.judge_pii_tags_file:
                tags |= load_pii_tags(self.judge_pii_tags_file)
            return DeterministicOracleJudge(lexicon, frozenset(tags))
        if self.judge_kind == "replay":
            if not self.judge_fixture:
                raise InputError("replay judge requires judge.fixture")
            return ReplayJudge(self.judge_fixture)
        if self.judge_kind == "remote-chat":
            if not self.judge_endpoint:
                raise InputError("remote-chat judge requires judge.endpoint")
            api_key = get_env(self.judge_credential_env) if self.judge_credential_env else None
            return RemoteChatJudge(
                self.judge_endpoint,
                model=self.judge_model,
                api_key=api_key,
                policy=self.judge_policy(),
                extra_params=self.judge_params,
                max_in_flight=self.judge_max_in_flight,
            )
        raise InputError(f"unknown judge kind: {self.judge_kind!r}")

    def build_icd(self):
        if self.icd_kind == "stub":
            return DeterministicStubIcd(self.icd_vocabulary, self.icd_seed)
        if self.icd_kind == "remote-http":
            if not self.icd_endpoint:
                raise InputError("remote-http ICD backend requires icd.endpoint")
            return RemoteHttpIcd(self.icd_endpoint, policy=self.judge_policy())
        raise InputError(f"unknown ICD backend kind: {self.icd_kind!r}")


def load_backend_config(path: str | Path) -> BackendConfig:
    """Parse `key = value` lines; credentials are named env vars, never values."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"backend config not found: {path}")
    cfg = BackendConfig()
    setters = {
        "judge.kind": lambda v: setattr(cfg, "judge_kind", v),
        "judge.endpoint": lambda v: setattr(cfg, "judge_endpoint", v),
        "judge.model": lambda v: setattr(cfg, "judge_model", v),
        "judge.credential_env": lambda v: setattr(cfg, "judge_credential_env", v),
        "judge.fixture": lambda v: setattr(cfg, "judge_fixture", v),
        "judge.lexicon": lambda v: setattr(cfg, "judge_lexicon_path", v),
        "judge.pii_tags": lambda v: setattr(
            cfg, "judge_pii_tags", tuple(t.strip() for t in v.split(",") if t.strip())
        ),
        "judge.pii_tags_file": lambda v: setattr(cfg, "judge_pii_tags_file", v),
        "judge.max_attempts": lambda v: setattr(cfg, "judge_max_attempts", int(v)),
        "judge.backoff_base": lambda v: setattr(cfg, "judge_backoff_base", float(v)),
        "judge.max_in_flight": lambda v: setattr(cfg, "judge_max_in_flight", int(v)),
        "icd.kind": lambda v: setattr(cfg, "icd_kind", v),
        "icd.endpoint": lambda v: setattr(cfg, "icd_endpoint", v),
        "icd.vocabulary": lambda v: setattr(
            cfg, "icd_vocabulary", tuple(c.strip() for c in v.split(",") if c.strip())
        ),
        "icd.seed": lambda v: setattr(cfg, "icd_seed", int(v)),
    }
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InputError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key.startswith("judge.param."):
            name = key[len("judge.param.") :]
            try:
                cfg.judge_params[name] = json.loads(value)
            except json.JSONDecodeError:
                cfg.judge_params[name] = value
            continue
        setter = setters.get(key)
        if setter is None:
            raise InputError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            setter(value)
        except ValueError as exc:
            raise InputError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return cfg
