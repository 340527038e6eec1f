import io
import json
import math

import numpy as np
from django.test import SimpleTestCase, override_settings, tag

from core.services.errors import SweepError
from core.services.model import SystemParams
from core.services.plot_service import emit_plot_script, render_html
from core.services.solver import SolverConfig
from core.services.sweep_service import (
    CSV_COLUMNS,
    DEFAULT_SCAN_COUPLINGS,
    KAPPA_SCAN,
    KappaRow,
    KappaThreshold,
    OutputRecord,
    SweepService,
    SweepSpec,
    format_number,
    kappa_threshold_scan,
    parse_grid,
    preset_config,
    preset_names,
    read_csv_records,
    render_records,
    run_sweep,
    spec_from_preset,
    write_kappa_csv,
)
from core.services.thermo import COMMON, FIXED_FIELD, ResponseSample, ThermoPoint

CARRIER = SystemParams(k=0, g=1.0, kappa=0.0)
HEADER = "m_th,n_th,ea_over_omega0,ef_over_nu,e_int,c_atom,c_field,n_fock_used,residual"


def carrier_spec(grid, **overrides):
    return SweepSpec(mode=COMMON, params=CARRIER, grid=grid, **overrides)


def sample_records():
    return [
        OutputRecord(0.5, 0.0, 0.1, 0.0, 0.0, -0.02, 0.0, 20, 1e-15),
        OutputRecord(1.0, 0.0, 0.2, 0.0, 0.0, 0.01, 0.0, 20, 2e-15),
        OutputRecord(0.5, 1.0, 0.1, 1.0, 0.0, -0.01, 0.0, 36, 1e-15),
        OutputRecord(1.0, 1.0, 0.2, 1.0, 0.0, 0.02, 0.0, 36, 3e-15),
    ]


class GridParsingTests(SimpleTestCase):
    def test_range_includes_stop(self):
        grid = parse_grid("0.05:3:0.05")
        self.assertEqual(len(grid), 60)
        self.assertEqual(grid[0], 0.05)
        self.assertEqual(grid[-1], 3.0)
        self.assertEqual(parse_grid("1:2:0.3"), (1.0, 1.3, 1.6, 1.9))

    def test_json_list(self):
        self.assertEqual(parse_grid(" [0.1, 2] "), (0.1, 2.0))

    def test_single_number(self):
        self.assertEqual(parse_grid("1"), (1.0,))
        self.assertEqual(parse_grid(" 0.7 "), (0.7,))

    def test_rejects_malformed_grids(self):
        for text in ("1:0:0.1", "0:1:0", "a:b:c", "1:2", '["x"]', "[0.1,", "nan", "inf", "one"):
            with self.subTest(text=text), self.assertRaises(ValueError):
                parse_grid(text)


class SweepSpecTests(SimpleTestCase):
    def test_default_solver_follows_settings(self):
        with override_settings(CBH_MAX_FOCK=64):
            self.assertEqual(carrier_spec((0.5,)).solver.max_fock, 64)

    def test_grid_must_be_increasing_and_positive(self):
        with self.assertRaises(ValueError):
            carrier_spec(())
        with self.assertRaises(ValueError):
            carrier_spec((0.5, 0.2))
        with self.assertRaises(ValueError):
            carrier_spec((0.0, 0.5))

    def test_mode_specific_fields(self):
        with self.assertRaises(ValueError):
            SweepSpec(mode=FIXED_FIELD, params=CARRIER, grid=(0.5,))
        with self.assertRaises(ValueError):
            SweepSpec(mode="fixed-atom-occupation", params=CARRIER, grid=(0.5,))
        with self.assertRaises(ValueError):
            SweepSpec(mode=KAPPA_SCAN, params=CARRIER, grid=(0.1, 0.2))
        with self.assertRaises(ValueError):
            SweepSpec(mode=KAPPA_SCAN, params=SystemParams(k=1, g=1.0, kappa=0.0), grid=(0.5, 2.5))
        with self.assertRaises(ValueError):
            carrier_spec((0.5,), output_format="xml")

    def test_fixed_values_expand_into_tasks(self):
        spec = SweepSpec(mode=FIXED_FIELD, params=CARRIER, grid=(0.5, 1.0), fixed_n=(0, 2))
        tasks = SweepService(spec, workers=1).tasks()
        self.assertEqual([(t.index, t.occupation, t.fixed) for t in tasks],
                         [(0, 0.5, 0.0), (1, 1.0, 0.0), (2, 0.5, 2.0), (3, 1.0, 2.0)])
        self.assertEqual(tasks[2].occupations(FIXED_FIELD), (0.5, 2.0))

    def test_kappa_scans_are_not_sweeps(self):
        spec = SweepSpec(mode=KAPPA_SCAN, params=SystemParams(k=1, g=1.0, kappa=0.0), grid=(0.1, 0.2))
        with self.assertRaises(ValueError):
            SweepService(spec)


class SweepServiceTests(SimpleTestCase):
    def test_records_follow_grid_order(self):
        spec = carrier_spec((0.1, 0.5, 1.0))
        service = SweepService(spec, workers=3)
        forward = service.run()
        backward = service.run(list(reversed(service.tasks())))
        self.assertEqual(render_records(forward, timestamp=False), render_records(backward[::-1], timestamp=False))
        self.assertEqual([r.m_th for r in forward], [0.1, 0.5, 1.0])
        self.assertAlmostEqual(forward[2].ea_over_omega0, 4.0 / 11.0, places=10)

    def test_output_is_deterministic(self):
        spec = carrier_spec((0.2, 0.4))
        first = render_records(run_sweep(spec, workers=2), timestamp=False)
        second = render_records(run_sweep(spec, workers=1), timestamp=False)
        self.assertEqual(first, second)

    def test_failed_points_become_error_rows(self):
        spec = carrier_spec((0.3, 3.0), solver=SolverConfig(max_fock=30))
        with self.assertLogs("core.services.sweep_service", level="ERROR"):
            records = run_sweep(spec, workers=2)
        self.assertFalse(records[0].failed)
        self.assertTrue(records[1].failed)
        self.assertEqual((records[1].m_th, records[1].n_th), (3.0, 3.0))
        self.assertTrue(math.isnan(records[1].c_atom))
        self.assertTrue(records[1].note.startswith("error: TruncationError"))

        text = render_records(records, timestamp=False)
        lines = text.splitlines()
        self.assertEqual(lines[0], HEADER)
        self.assertEqual(lines[2], "3.00000000000000e+00,3.00000000000000e+00," + ",".join(["nan"] * 7))
        self.assertTrue(lines[3].startswith("# row 1: error: TruncationError"))
        self.assertEqual(len(lines), 4)

    def test_all_points_failing_is_a_run_error(self):
        spec = carrier_spec((3.0,), solver=SolverConfig(max_fock=30))
        with self.assertLogs("core.services.sweep_service", level="ERROR"), self.assertRaises(SweepError):
            run_sweep(spec)

    def test_undriven_point_does_not_cool(self):
        spec = SweepSpec(mode=COMMON, params=SystemParams(k=1, g=0.0, kappa=0.1), grid=(1.0,))
        (record,) = run_sweep(spec)
        self.assertGreaterEqual(record.c_atom, 0.0)
        self.assertGreaterEqual(record.c_field, 0.0)

    def test_curves_per_fixed_value(self):
        spec = SweepSpec(mode=FIXED_FIELD, params=CARRIER, grid=(0.1, 0.3), fixed_n=(0.0, 1.0))
        service = SweepService(spec, workers=2)
        curves = service.curves(service.run())
        self.assertEqual(list(curves), [0.0, 1.0])
        self.assertEqual(len(curves[1.0].samples), 2)
        # the carrier atom ignores the field reservoir
        np.testing.assert_allclose(curves[0.0].values("atom"), curves[1.0].values("atom"), rtol=1e-8, atol=1e-12)


class OutputFormatTests(SimpleTestCase):
    def test_interaction_energy_breach_is_noted(self):
        point = ThermoPoint(m_th=0.5, n_th=0.5, ea_over_omega0=0.2, ef_over_nu=0.4, e_int=1e-6, n_fock_used=20)
        record = OutputRecord.from_sample(ResponseSample(0.5, -0.1, 0.1, point))
        self.assertIn("interaction energy 1.000e-06 above tolerance", record.note)
        self.assertFalse(record.failed)

        clean = ThermoPoint(m_th=0.5, n_th=0.5, ea_over_omega0=0.2, ef_over_nu=0.4, e_int=1e-12, n_fock_used=20)
        self.assertIsNone(OutputRecord.from_sample(ResponseSample(0.5, -0.1, 0.1, clean)).note)

    def test_number_format(self):
        self.assertEqual(format_number(0.1), "1.00000000000000e-01")
        self.assertEqual(format_number(20), "20")
        self.assertEqual(format_number(None), "nan")
        self.assertEqual(format_number(float("nan")), "nan")

    def test_csv_layout(self):
        text = render_records(sample_records())
        lines = text.splitlines()
        self.assertEqual(lines[0], ",".join(CSV_COLUMNS))
        self.assertEqual(len(lines), 6)
        self.assertTrue(lines[-1].startswith("# generated "))
        self.assertNotIn("\r", text)
        self.assertNotIn("# generated", render_records(sample_records(), timestamp=False))

    def test_json_uses_null_for_missing_values(self):
        records = [OutputRecord(0.3, 0.3, note="error: TruncationError: too many levels")]
        document = json.loads(render_records(records, "json", timestamp=False))
        self.assertEqual(document["columns"], list(CSV_COLUMNS))
        row = document["records"][0]
        self.assertIsNone(row["c_field"])
        self.assertIsNone(row["n_fock_used"])
        self.assertEqual(row["m_th"], 0.3)
        self.assertIn("TruncationError", row["note"])
        self.assertNotIn("generated", document)

    def test_written_csv_reads_back(self):
        records = sample_records() + [OutputRecord(2.0, 2.0, note="error: ResidualError: 1e-9")]
        parsed = read_csv_records(io.StringIO(render_records(records)))
        self.assertEqual(parsed[:4], sample_records())
        self.assertTrue(parsed[4].failed)
        self.assertEqual(parsed[4].note, "error: ResidualError: 1e-9")

    def test_unknown_format(self):
        with self.assertRaises(ValueError):
            render_records(sample_records(), "xml")


class PlotScriptTests(SimpleTestCase):
    def test_script_is_deterministic(self):
        first = emit_plot_script(sample_records(), csv_path="fig.csv", mode=FIXED_FIELD, title="fig3a")
        second = emit_plot_script(sample_records(), csv_path="fig.csv", mode=FIXED_FIELD, title="fig3a")
        self.assertEqual(first, second)
        self.assertIn('"fig.csv" skip 1', first)
        self.assertIn("abs($2-", first)
        self.assertIn("n_th=1", first)

    def test_atomic_energy_is_scaled_by_ten(self):
        script = emit_plot_script(sample_records(), curves=("energy_field", "energy_atom"))
        self.assertIn("using 1:4 with lines lw 2 dt 1", script)
        self.assertIn("using 1:(10*$3) with lines lw 2 dt 2", script)
        self.assertIn("plot NaN notitle", script)

    def test_empty_selection_draws_axes_only(self):
        script = emit_plot_script(sample_records(), curves=())
        self.assertEqual(script.count("plot NaN notitle"), 2)
        self.assertIn("set multiplot layout 2,1", script)

    def test_invalid_input(self):
        with self.assertRaises(ValueError):
            emit_plot_script([])
        with self.assertRaises(ValueError):
            emit_plot_script(sample_records(), curves=("entropy",))

    def test_html_figure(self):
        page = render_html(sample_records(), mode=FIXED_FIELD, title="fig3a")
        self.assertIn('id="cbh-response-figure"', page)
        self.assertIn("cdn.plot.ly", page)


class PresetTests(SimpleTestCase):
    def test_names(self):
        self.assertEqual(
            sorted(preset_names()),
            ["carrier", "cavity-qed", "fig1", "fig2", "fig3a", "fig3b", "trapped-ion"],
        )

    def test_every_preset_builds(self):
        for name in preset_names():
            with self.subTest(name=name):
                self.assertEqual(len(spec_from_preset(name).grid), 60)

    def test_figure_preset(self):
        spec = spec_from_preset("fig3b")
        self.assertEqual(spec.mode, FIXED_FIELD)
        self.assertEqual((spec.params.k, spec.params.g, spec.params.kappa), (2, 0.2, 0.1))
        self.assertEqual(spec.fixed_n, (0.0, 1.0, 2.0))
        self.assertEqual(len(spec.grid), 60)

    def test_overrides(self):
        spec = spec_from_preset("carrier", grid=[0.5, 1.0], format="json", out="carrier.json")
        self.assertEqual(spec.grid, (0.5, 1.0))
        self.assertEqual(spec.output_format, "json")
        self.assertEqual(spec.output_path, "carrier.json")

    def test_experimental_presets_are_reduced(self):
        ion = spec_from_preset("trapped-ion")
        self.assertAlmostEqual(ion.params.g, 1.0)
        cavity = spec_from_preset("cavity-qed")
        self.assertAlmostEqual(cavity.params.g, 1.0)
        self.assertAlmostEqual(cavity.params.kappa, 0.1)
        self.assertNotIn("physical_rates", preset_config("cavity-qed"))

    def test_unknown_preset(self):
        with self.assertRaises(ValueError):
            preset_config("fig9")


class KappaScanTests(SimpleTestCase):
    def test_large_damping_has_no_cooling_region(self):
        result = kappa_threshold_scan(1, 1.0, [1.5, 2.0], occupations=(0.5, 1.0, 1.5, 2.0), workers=2)
        self.assertEqual(result.threshold, 0.0)
        self.assertEqual(result.status, "none")
        self.assertTrue(result.flagged)
        self.assertEqual(result.couplings, (1.0,))
        self.assertEqual([(row.g, row.kappa) for row in result.rows], [(1.0, 1.5), (1.0, 2.0)])
        self.assertTrue(all(row.cooling is False for row in result.rows))

        stream = io.StringIO()
        write_kappa_csv(result, stream)
        lines = stream.getvalue().splitlines()
        self.assertEqual(lines[0], "g,kappa,cooling,min_slope,at_occupation")
        self.assertEqual(lines[-1], "# k=1 g=1 threshold=0.0000 status=none couplings=1")

    def test_footer_names_the_attaining_coupling(self):
        rows = [
            KappaRow(0.2, 0.3, False, -0.1, 0.5),
            KappaRow(0.5, 0.3, True, -0.7, 0.4),
            KappaRow(0.5, 0.45, False, 0.2, 0.4),
        ]
        result = KappaThreshold(2, 0.5, 0.4, "bracketed", rows, (0.2, 0.5, 1.0))
        self.assertFalse(result.flagged)

        stream = io.StringIO()
        write_kappa_csv(result, stream)
        lines = stream.getvalue().splitlines()
        self.assertEqual(len(lines), 5)
        self.assertTrue(lines[2].startswith("5.00000000000000e-01,3.00000000000000e-01,1,"))
        self.assertEqual(lines[-1], "# k=2 g=0.5 threshold=0.4000 status=bracketed couplings=0.2,0.5,1")

    def test_default_couplings_follow_the_sideband_order(self):
        self.assertEqual(DEFAULT_SCAN_COUPLINGS[2], (0.2, 0.5, 1.0))
        self.assertIn(1.0, DEFAULT_SCAN_COUPLINGS[1])

    def test_validation(self):
        with self.assertRaises(ValueError):
            kappa_threshold_scan(0, 1.0, [0.1])
        with self.assertRaises(ValueError):
            kappa_threshold_scan(1, 1.0, [0.1, 2.5])
        with self.assertRaises(ValueError):
            kappa_threshold_scan(1, 1.0, [])
        with self.assertRaises(ValueError):
            kappa_threshold_scan(1, [], [0.1])
        with self.assertRaises(ValueError):
            kappa_threshold_scan(2, [0.5, -1.0], [0.1])

    @tag("slow")
    def test_thresholds_over_default_couplings(self):
        kappas = parse_grid("0.05:0.6:0.05")
        for k, expected in ((1, 0.3), (2, 0.4)):
            result = kappa_threshold_scan(k, None, kappas)
            with self.subTest(k=k):
                self.assertEqual(result.status, "bracketed")
                self.assertEqual(result.couplings, DEFAULT_SCAN_COUPLINGS[k])
                self.assertAlmostEqual(result.threshold, expected, delta=0.05)
                self.assertIn(result.g, result.couplings)
        # The second sideband peaks at the intermediate coupling.
        self.assertEqual(result.g, 0.5)

    @tag("slow")
    def test_weak_second_sideband_coupling_alone_understates_the_threshold(self):
        kappas = parse_grid("0.05:0.6:0.05")
        weak = kappa_threshold_scan(2, 0.2, kappas)
        best = kappa_threshold_scan(2, None, kappas)
        self.assertLess(weak.threshold, 0.3)
        self.assertGreater(best.threshold, weak.threshold + 0.05)
