from config import Config


class TestConfig:
    """Test cases for environment configuration."""

    def setup_method(self):
        self.names = ['TOPO_META_OUT', 'TOPO_META_LOG_LEVEL', 'TOPO_META_LOG_DIR',
                      'TOPO_META_CANDIDATE_BUDGET', 'TOPO_META_WORKERS']

    def clear(self, monkeypatch):
        for name in self.names:
            monkeypatch.delenv(name, raising=False)

    def test_defaults(self, monkeypatch):
        """Test the defaults when nothing is set."""
        self.clear(monkeypatch)
        status = Config().validate()

        assert status["valid"] is True
        assert status["run_config"] == {
            'out_dir': 'results',
            'log_level': 'INFO',
            'log_dir': 'logs',
            'candidate_budget': 10000,
            'workers': 1
        }

    def test_environment_overrides(self, monkeypatch):
        """Test that environment values are picked up."""
        self.clear(monkeypatch)
        monkeypatch.setenv('TOPO_META_LOG_LEVEL', 'debug')
        monkeypatch.setenv('TOPO_META_WORKERS', '4')
        config = Config()

        assert config.LOG_LEVEL == 'DEBUG'
        assert config.WORKERS == 4
        assert config.validate()["valid"] is True

    def test_invalid_values(self, monkeypatch):
        """Test that bad values are reported as issues."""
        self.clear(monkeypatch)
        monkeypatch.setenv('TOPO_META_WORKERS', '0')
        monkeypatch.setenv('TOPO_META_CANDIDATE_BUDGET', 'many')
        monkeypatch.setenv('TOPO_META_LOG_LEVEL', 'LOUD')
        status = Config().validate()

        assert status["valid"] is False
        assert len(status["issues"]) == 3
        assert any("TOPO_META_WORKERS" in issue for issue in status["issues"])
