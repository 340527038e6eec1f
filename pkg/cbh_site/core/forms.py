import json

from django import forms

from .services.model import SIDEBAND_ORDERS, SystemParams
from .services.solver import METHODS, SolverConfig
from .services.sweep_service import OUTPUT_FORMATS, SWEEP_MODES, SweepSpec, parse_grid
from .services.thermo import ReferenceFrequencies


def _parse_number_list(raw, label, allow_empty=True):
    """Accept a list of numbers, a JSON list string, or a start:stop:step range."""
    if raw in (None, "", []):
        if allow_empty:
            return ()
        raise forms.ValidationError(f"{label} is required.")
    if isinstance(raw, str):
        try:
            return parse_grid(raw)
        except ValueError as exc:
            raise forms.ValidationError(str(exc)) from exc
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        return (float(raw),)
    if not isinstance(raw, (list, tuple)):
        raise forms.ValidationError(f"{label} must be a list of numbers.")
    values = []
    for entry in raw:
        if isinstance(entry, bool) or not isinstance(entry, (int, float)):
            raise forms.ValidationError(f"{label} must contain numbers only.")
        values.append(float(entry))
    return tuple(values)


class SystemParamsForm(forms.Form):
    k = forms.TypedChoiceField(choices=[(k, str(k)) for k in SIDEBAND_ORDERS], coerce=int)
    g = forms.FloatField(min_value=0.0)
    kappa = forms.FloatField(min_value=0.0)
    n_th = forms.FloatField(min_value=0.0, required=False)
    m_th = forms.FloatField(min_value=0.0, required=False)
    n_fock = forms.IntegerField(min_value=2, required=False)
    gamma = forms.FloatField(required=False)
    phase = forms.FloatField(required=False)

    def clean_gamma(self):
        gamma = self.cleaned_data.get("gamma")
        if gamma is not None and gamma <= 0:
            raise forms.ValidationError("gamma must be positive.")
        return gamma

    def to_params(self) -> SystemParams:
        data = self.cleaned_data
        return SystemParams(
            k=data["k"],
            g=data["g"],
            kappa=data["kappa"],
            n_th=data.get("n_th") or 0.0,
            m_th=data.get("m_th") or 0.0,
            n_fock=data.get("n_fock"),
            gamma=data["gamma"] if data.get("gamma") is not None else 1.0,
            phase=data.get("phase") or 0.0,
        )


class SolverConfigForm(forms.Form):
    residual_tol = forms.FloatField(required=False)
    truncation_tol = forms.FloatField(required=False)
    max_fock = forms.IntegerField(min_value=2, required=False)
    method = forms.ChoiceField(choices=[(m, m) for m in METHODS], required=False)
    initial_dt = forms.FloatField(required=False)
    max_time = forms.FloatField(required=False)
    step_tol = forms.FloatField(required=False)
    direct_limit = forms.IntegerField(min_value=1, required=False)
    occupation_rtol = forms.FloatField(required=False)
    use_symmetry = forms.NullBooleanField(required=False)

    def clean(self):
        cleaned = super().clean()
        for name in ("residual_tol", "truncation_tol", "initial_dt", "max_time", "step_tol", "occupation_rtol"):
            value = cleaned.get(name)
            if value is not None and value <= 0:
                self.add_error(name, "Must be positive.")
        return cleaned

    def to_config(self) -> SolverConfig:
        """Unset fields fall back to the project settings."""
        overrides = {name: value for name, value in self.cleaned_data.items() if value not in (None, "")}
        return SolverConfig.from_settings(**overrides)


class SweepSpecForm(forms.Form):
    mode = forms.ChoiceField(choices=[(m, m) for m in SWEEP_MODES])
    # Lists arrive either as JSON arrays or as start:stop:step strings.
    grid = forms.Field()
    fixed_n = forms.Field(required=False)
    fixed_m = forms.Field(required=False)
    occupations = forms.Field(required=False)
    omega0 = forms.FloatField(required=False)
    nu = forms.FloatField(required=False)
    omega_ref = forms.FloatField(required=False)
    fd_step = forms.FloatField(required=False)
    format = forms.ChoiceField(choices=[(f, f) for f in OUTPUT_FORMATS], required=False)
    out = forms.CharField(required=False)

    def clean_grid(self):
        grid = _parse_number_list(self.cleaned_data.get("grid"), "Grid", allow_empty=False)
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise forms.ValidationError("Grid must be strictly increasing.")
        return grid

    def clean_fixed_n(self):
        return _parse_number_list(self.cleaned_data.get("fixed_n"), "fixed_n")

    def clean_fixed_m(self):
        return _parse_number_list(self.cleaned_data.get("fixed_m"), "fixed_m")

    def clean_occupations(self):
        return _parse_number_list(self.cleaned_data.get("occupations"), "occupations")

    def clean(self):
        cleaned = super().clean()
        mode = cleaned.get("mode")
        if mode == "fixed-field-occupation" and not cleaned.get("fixed_n"):
            self.add_error("fixed_n", "fixed-field-occupation mode needs fixed_n values.")
        if mode == "fixed-atom-occupation" and not cleaned.get("fixed_m"):
            self.add_error("fixed_m", "fixed-atom-occupation mode needs fixed_m values.")
        for name in ("omega0", "nu", "omega_ref", "fd_step"):
            value = cleaned.get(name)
            if value is not None and value <= 0:
                self.add_error(name, "Must be positive.")
        return cleaned

    def to_freqs(self) -> ReferenceFrequencies:
        data = self.cleaned_data
        values = {name: data.get(name) for name in ("omega0", "nu", "omega_ref")}
        return ReferenceFrequencies(**{name: value for name, value in values.items() if value is not None})


def _form_errors(form) -> str:
    return "; ".join(f"{field}: {' '.join(errors)}" for field, errors in form.errors.items())


def spec_from_config(data) -> SweepSpec:
    """Validate a sweep configuration mapping (or JSON text) and build the SweepSpec."""
    if isinstance(data, str):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as exc:
            raise forms.ValidationError("Unable to decode sweep configuration.") from exc
    if not isinstance(data, dict):
        raise forms.ValidationError("Sweep configuration must be a JSON object.")

    params_form = SystemParamsForm(data=data.get("params") or {})
    solver_form = SolverConfigForm(data=data.get("solver") or {})
    freqs = data.get("freqs") or {}
    spec_form = SweepSpecForm(data={**{k: v for k, v in data.items() if k not in ("params", "solver", "freqs")}, **freqs})

    errors = [
        f"{name}: {_form_errors(form)}"
        for name, form in (("params", params_form), ("solver", solver_form), ("spec", spec_form))
        if not form.is_valid()
    ]
    if errors:
        raise forms.ValidationError(" | ".join(errors))

    cleaned = spec_form.cleaned_data
    options = {}
    if cleaned.get("occupations"):
        options["occupations"] = cleaned["occupations"]
    try:
        return SweepSpec(
            mode=cleaned["mode"],
            params=params_form.to_params(),
            grid=cleaned["grid"],
            fixed_n=cleaned["fixed_n"],
            fixed_m=cleaned["fixed_m"],
            freqs=spec_form.to_freqs(),
            solver=solver_form.to_config(),
            fd_step=cleaned.get("fd_step"),
            output_format=cleaned.get("format") or "csv",
            output_path=cleaned.get("out") or None,
            **options,
        )
    except ValueError as exc:
        raise forms.ValidationError(str(exc)) from exc
