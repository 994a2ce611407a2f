from django.test import SimpleTestCase, override_settings

from experiments.services import runtime_settings


class RuntimeSettingsTests(SimpleTestCase):
    def setUp(self):
        runtime_settings.reload_config()

    def tearDown(self):
        runtime_settings.reload_config()

    def test_defaults_from_settings(self):
        config = runtime_settings.get_numerics_config()
        self.assertEqual(config.radius_margin, 0.1)
        self.assertEqual(config.c_cap, 1e3)
        self.assertEqual(config.ensemble_size, 32)
        self.assertEqual(config.max_path_depth, 50)
        self.assertEqual(config.ensemble_backend, "inline")
        self.assertEqual(config.metrics_textfile, "")

    def test_config_is_cached_until_reload(self):
        first = runtime_settings.get_numerics_config()
        self.assertIs(first, runtime_settings.get_numerics_config())
        runtime_settings.reload_config()
        self.assertIsNot(first, runtime_settings.get_numerics_config())

    @override_settings(CARLEMAN={"C_CAP": "50", "ENSEMBLE_SIZE": "4"})
    def test_missing_keys_fall_back_to_defaults(self):
        runtime_settings.reload_config()
        config = runtime_settings.get_numerics_config()
        self.assertEqual(config.c_cap, 50.0)
        self.assertEqual(config.ensemble_size, 4)
        self.assertEqual(config.s1_safety, 0.1)
        self.assertEqual(config.failure_growth, 1.8)


def test_numerics_settings_fixture(numerics_settings):
    with numerics_settings(MESH_DRIFT_TOL=0.5):
        assert runtime_settings.get_numerics_config().mesh_drift_tol == 0.5
    assert runtime_settings.get_numerics_config().mesh_drift_tol == 0.25
