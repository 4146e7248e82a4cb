"""Config file loading and pipeline assembly shared by the CLI and service.

One JSON config drives everything: listen address, backend table,
per-role model selection, template overrides, store directory, and the
offline fixtures (script, router model, reference patients, search
corpus). The HYGIEIA_CONFIG environment variable supplies the path when
no explicit one is given. API keys are injected only through environment
variables named per backend (HYGIEIA_BACKEND_<NAME>_KEY).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .gateway import (
    AgentRole,
    Gateway,
    HttpChatBackend,
    RoleBinding,
    Script,
    ScriptedBackend,
)
from .knowledge import FixtureSearchProvider, KnowledgeService, PatientIndex, load_reference_patients
from .model import PipelineConfig, load_templates
from .normalize import load_synonyms
from .orchestrator import Pipeline
from .router import DEFAULT_DIM, HashingEmbedder, load_router

CONFIG_ENV = "HYGIEIA_CONFIG"
TOKEN_ENV = "HYGIEIA_API_TOKEN"


@dataclass
class AppConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    store_dir: str = "./hygieia-store"
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    script: str | None = None
    backends: dict[str, dict] = field(default_factory=dict)
    roles: dict[str, str] = field(default_factory=dict)
    router_model: str | None = None
    reference_patients: str | None = None
    search_corpus: str | None = None
    templates_dir: str | None = None
    synonyms: str | None = None
    embedding_dim: int = DEFAULT_DIM
    cors_origins: list[str] = field(default_factory=lambda: ["*"])
    base_dir: Path = field(default_factory=Path.cwd)

    def resolve(self, path: str | None) -> str | None:
        if path is None:
            return None
        p = Path(path)
        return str(p if p.is_absolute() else self.base_dir / p)


def load_config(path: str | Path | None = None) -> AppConfig:
    """Read the JSON config; fall back to $HYGIEIA_CONFIG; defaults if neither."""
    if path is None:
        path = os.environ.get(CONFIG_ENV)
    if path is None:
        return AppConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")

    listen = doc.get("listen", "127.0.0.1:8080")
    try:
        host, port_text = listen.rsplit(":", 1)
        port = int(port_text)
    except (ValueError, AttributeError) as exc:
        raise ConfigError(f"bad listen address {listen!r}; expected host:port") from exc

    try:
        pipeline = PipelineConfig(**doc.get("pipeline", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad pipeline settings: {exc}") from exc

    roles = doc.get("roles", {})
    for role_name in roles:
        try:
            AgentRole(role_name)
        except ValueError as exc:
            raise ConfigError(f"unknown agent role {role_name!r}") from exc

    return AppConfig(
        host=host,
        port=port,
        store_dir=doc.get("store_dir", "./hygieia-store"),
        pipeline=pipeline,
        script=doc.get("script"),
        backends=doc.get("backends", {}),
        roles=roles,
        router_model=doc.get("router_model"),
        reference_patients=doc.get("reference_patients"),
        search_corpus=doc.get("search_corpus"),
        templates_dir=doc.get("templates_dir"),
        synonyms=doc.get("synonyms"),
        embedding_dim=int(doc.get("embedding_dim", DEFAULT_DIM)),
        cors_origins=doc.get("cors_origins", ["*"]),
        base_dir=path.resolve().parent,
    )


def build_gateway(cfg: AppConfig, script_override: str | Path | None = None) -> Gateway:
    """Bind each agent role to its backend.

    A script (override flag or config key) puts every role on the
    deterministic scripted backend. Otherwise the backend table applies:
    all roles default to the "default" backend, the Verifier to
    "verifier" when that entry exists.
    """
    script_path = script_override or cfg.resolve(cfg.script)
    if script_path:
        backend = ScriptedBackend(Script.from_file(script_path))
        bindings = {role: RoleBinding(backend=backend, model="scripted") for role in AgentRole}
        return Gateway(bindings, retry_base_ms=0)

    if not cfg.backends:
        raise ConfigError("no backends configured and no script provided")
    built: dict[str, HttpChatBackend] = {}
    models: dict[str, str] = {}
    for name, spec in cfg.backends.items():
        if "url" not in spec:
            raise ConfigError(f"backend {name!r} needs a url")
        key_env = spec.get("key_env", f"HYGIEIA_BACKEND_{name.upper()}_KEY")
        built[name] = HttpChatBackend(backend_id=name, url=spec["url"], key_env=key_env)
        models[name] = spec.get("model", "")

    def pick(role: AgentRole) -> str:
        if role.value in cfg.roles:
            return cfg.roles[role.value]
        if role is AgentRole.VERIFIER and "verifier" in built:
            return "verifier"
        return "default" if "default" in built else next(iter(built))

    bindings = {}
    for role in AgentRole:
        name = pick(role)
        if name not in built:
            raise ConfigError(f"role {role.value} points at unknown backend {name!r}")
        bindings[role] = RoleBinding(backend=built[name], model=models[name])
    return Gateway(bindings)


def build_pipeline(cfg: AppConfig, script_override: str | Path | None = None) -> Pipeline:
    gateway = build_gateway(cfg, script_override)
    templates = load_templates(cfg.resolve(cfg.templates_dir))
    embedder = HashingEmbedder(cfg.embedding_dim)

    router_model = None
    router_path = cfg.resolve(cfg.router_model)
    if router_path:
        if not Path(router_path).exists():
            raise ConfigError(f"router model not found: {router_path}")
        router_model = load_router(router_path)
        if router_model.dim != embedder.dim:
            embedder = HashingEmbedder(router_model.dim)

    search_provider = None
    corpus_path = cfg.resolve(cfg.search_corpus)
    if corpus_path:
        if not Path(corpus_path).exists():
            raise ConfigError(f"search corpus not found: {corpus_path}")
        search_provider = FixtureSearchProvider.from_file(corpus_path)

    patient_index = None
    patients_path = cfg.resolve(cfg.reference_patients)
    if patients_path:
        if not Path(patients_path).exists():
            raise ConfigError(f"reference patients file not found: {patients_path}")
        patient_index = PatientIndex(load_reference_patients(patients_path, embedder))

    knowledge = KnowledgeService(
        gateway,
        templates,
        search_provider=search_provider,
        patient_index=patient_index,
        embedder=embedder,
    )
    return Pipeline(
        gateway,
        templates,
        router_model=router_model,
        knowledge=knowledge,
        embedder=embedder,
    )


def load_report_synonyms(cfg: AppConfig) -> dict[str, str] | None:
    path = cfg.resolve(cfg.synonyms)
    if not path:
        return None
    if not Path(path).exists():
        raise ConfigError(f"synonym table not found: {path}")
    return load_synonyms(path)
