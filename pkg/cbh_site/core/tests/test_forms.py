import json

from django import forms
from django.test import SimpleTestCase, override_settings

from core.forms import SolverConfigForm, SystemParamsForm, spec_from_config
from core.services.model import SystemParams
from core.services.solver import SolverConfig
from core.services.sweep_service import SweepSpec
from core.services.thermo import FIXED_FIELD, ReferenceFrequencies


class SystemParamsFormTests(SimpleTestCase):
    def test_builds_params_with_defaults(self):
        form = SystemParamsForm(data={"k": "2", "g": "0.2", "kappa": "0.1"})
        self.assertTrue(form.is_valid(), form.errors)
        params = form.to_params()
        self.assertEqual(params, SystemParams(k=2, g=0.2, kappa=0.1))
        self.assertEqual(params.gamma, 1.0)

    def test_rejects_unknown_order_and_negative_rates(self):
        self.assertFalse(SystemParamsForm(data={"k": 3, "g": 1.0, "kappa": 0.1}).is_valid())
        form = SystemParamsForm(data={"k": 1, "g": -1.0, "kappa": 0.1})
        self.assertFalse(form.is_valid())
        self.assertIn("g", form.errors)
        self.assertFalse(SystemParamsForm(data={"k": 1, "g": 1.0, "kappa": 0.1, "gamma": 0}).is_valid())


class SolverConfigFormTests(SimpleTestCase):
    @override_settings(CBH_MAX_FOCK=64)
    def test_blank_fields_use_settings(self):
        form = SolverConfigForm(data={"residual_tol": "1e-9"})
        self.assertTrue(form.is_valid(), form.errors)
        config = form.to_config()
        self.assertEqual(config.max_fock, 64)
        self.assertEqual(config.residual_tol, 1e-9)

    def test_rejects_non_positive_tolerances(self):
        form = SolverConfigForm(data={"truncation_tol": 0})
        self.assertFalse(form.is_valid())
        self.assertIn("truncation_tol", form.errors)


class SweepConfigTests(SimpleTestCase):
    def test_config_round_trip(self):
        spec = SweepSpec(
            mode=FIXED_FIELD,
            params=SystemParams(k=2, g=0.2, kappa=0.1, gamma=2.0),
            grid=(0.1, 0.2, 0.4),
            fixed_n=(0.0, 1.0),
            freqs=ReferenceFrequencies(omega0=10.0, nu=1.0, omega_ref=1.0),
            solver=SolverConfig(max_fock=128, residual_tol=1e-9, use_symmetry=False),
            fd_step=0.01,
            output_format="json",
            output_path="out.json",
        )
        self.assertEqual(spec_from_config(spec.to_config()), spec)
        self.assertEqual(spec_from_config(json.dumps(spec.to_config())), spec)

    def test_range_strings(self):
        spec = spec_from_config(
            {"mode": "fixed-field-occupation", "params": {"k": 1, "g": 1, "kappa": 0.1}, "grid": "0.1:0.5:0.1", "fixed_n": "[0, 2]"}
        )
        self.assertEqual(spec.grid, (0.1, 0.2, 0.3, 0.4, 0.5))
        self.assertEqual(spec.fixed_n, (0.0, 2.0))
        self.assertEqual(spec.output_format, "csv")

    def test_single_fixed_value(self):
        spec = spec_from_config(
            {"mode": "fixed-field-occupation", "params": {"k": 1, "g": 1, "kappa": 0.1}, "grid": "[0.5]", "fixed_n": "1"}
        )
        self.assertEqual(spec.fixed_n, (1.0,))

    def test_missing_fixed_values(self):
        with self.assertRaisesMessage(forms.ValidationError, "fixed_n"):
            spec_from_config({"mode": "fixed-field-occupation", "params": {"k": 1, "g": 1, "kappa": 0.1}, "grid": [0.5]})

    def test_invalid_inputs(self):
        base = {"mode": "common-occupation", "params": {"k": 1, "g": 1, "kappa": 0.1}, "grid": [0.5, 1.0]}
        invalid = [
            {**base, "params": {"k": 3, "g": 1, "kappa": 0.1}},
            {**base, "grid": [1.0, 0.5]},
            {**base, "grid": "1:0:0.1"},
            {**base, "mode": "heat-map"},
            {**base, "omega_ref": -1},
            {**base, "solver": {"method": "magic"}},
            "[1, 2]",
            "{not json",
        ]
        for data in invalid:
            with self.subTest(data=data), self.assertRaises(forms.ValidationError):
                spec_from_config(data)

    def test_frequencies_are_read_from_their_block(self):
        spec = spec_from_config(
            {
                "mode": "common-occupation",
                "params": {"k": 0, "g": 1, "kappa": 0},
                "grid": [1.0],
                "freqs": {"omega0": 5.0, "omega_ref": 2.0},
            }
        )
        self.assertEqual(spec.freqs, ReferenceFrequencies(omega0=5.0, nu=1.0, omega_ref=2.0))
