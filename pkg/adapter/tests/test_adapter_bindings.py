"""Binding construction, credential hygiene, and config loading."""

import json

import pytest

from zebra_adapter import ConfigError, ModelBinding, load_bindings


def test_minimal_binding_defaults():
    binding = ModelBinding(backend="openai_chat", model="gpt-4o-mini")
    assert binding.params == {}
    assert binding.credential_env is None
    assert binding.token_report == "model_reported"
    assert binding.base_url is None


def test_backend_and_model_required():
    with pytest.raises(ConfigError):
        ModelBinding(backend="", model="m")
    with pytest.raises(ConfigError):
        ModelBinding(backend="b", model="")


def test_token_report_validated():
    with pytest.raises(ConfigError, match="token_report"):
        ModelBinding(backend="b", model="m", token_report="guess")
    for mode in ("model_reported", "estimator"):
        assert ModelBinding(backend="b", model="m", token_report=mode)


@pytest.mark.parametrize("name", ["OPENAI_API_KEY", "_TOKEN", "KEY2", "A"])
def test_credential_env_accepts_variable_names(name):
    binding = ModelBinding(backend="b", model="m", credential_env=name)
    assert binding.credential_env == name


@pytest.mark.parametrize("leak", ["sk-abc123", "my key", "lower_case", "KEY-NAME", ""])
def test_credential_env_rejects_anything_but_a_name(leak):
    with pytest.raises(ConfigError, match="environment-variable name"):
        ModelBinding(backend="b", model="m", credential_env=leak)


def test_resolve_credential_reads_environment(monkeypatch):
    binding = ModelBinding(backend="b", model="m", credential_env="ADAPTER_TEST_KEY")
    monkeypatch.setenv("ADAPTER_TEST_KEY", "hunter2")
    assert binding.resolve_credential() == "hunter2"
    monkeypatch.delenv("ADAPTER_TEST_KEY")
    with pytest.raises(ConfigError, match="ADAPTER_TEST_KEY"):
        binding.resolve_credential()


def test_resolve_credential_without_env_var_is_none():
    assert ModelBinding(backend="b", model="m").resolve_credential() is None


def test_to_record_never_contains_key_material(monkeypatch):
    monkeypatch.setenv("ADAPTER_TEST_KEY", "hunter2")
    binding = ModelBinding(
        backend="openai_chat",
        model="gpt-4o-mini",
        params={"temperature": 0},
        credential_env="ADAPTER_TEST_KEY",
    )
    dumped = json.dumps(binding.to_record())
    assert "hunter2" not in dumped
    assert "ADAPTER_TEST_KEY" in dumped
    assert json.loads(dumped)["params"] == {"temperature": 0}


def test_load_bindings_round_trip(tmp_path):
    path = tmp_path / "bindings.json"
    path.write_text(
        json.dumps(
            {
                "baseline": {
                    "backend": "openai_chat",
                    "model": "gpt-4o-mini",
                    "params": {"temperature": 0},
                    "credential_env": "OPENAI_API_KEY",
                },
                "estimated": {
                    "backend": "openai_chat",
                    "model": "gpt-4o-mini",
                    "token_report": "estimator",
                },
            }
        ),
        encoding="utf-8",
    )
    bindings = load_bindings(str(path))
    assert set(bindings) == {"baseline", "estimated"}
    assert bindings["baseline"].params == {"temperature": 0}
    assert bindings["estimated"].token_report == "estimator"


def test_load_bindings_rejects_inline_key_fields(tmp_path):
    path = tmp_path / "bindings.json"
    path.write_text(
        json.dumps({"x": {"backend": "b", "model": "m", "api_key": "sk-x"}}),
        encoding="utf-8",
    )
    with pytest.raises(ConfigError, match="api_key"):
        load_bindings(str(path))


def test_load_bindings_rejects_missing_fields(tmp_path):
    path = tmp_path / "bindings.json"
    path.write_text(json.dumps({"x": {"backend": "b"}}), encoding="utf-8")
    with pytest.raises(ConfigError, match="model"):
        load_bindings(str(path))


def test_load_bindings_rejects_non_object(tmp_path):
    path = tmp_path / "bindings.json"
    path.write_text("[1, 2]", encoding="utf-8")
    with pytest.raises(ConfigError, match="condition"):
        load_bindings(str(path))
