import datetime
import logging
import math
from pathlib import Path

import pandas as pd

from .concentration import default_beta
from .config_manager import ConfigManager, ExperimentSpec, RunSettings
from .errors import ConditionError, HeavyTailError
from .large_deviation import (
    BoundaryClass,
    classify_boundary,
    ld_poly_limit,
    ld_ratio,
    ld_result_frame,
    ld_summary,
    one_sample_lower_bound,
    poly_condition,
)
from .montecarlo import REPORT_COLUMNS, TSpan, dominate_check
from .truncation import PROVIDERS
from .version_detect import get_versions

logger = logging.getLogger(__name__)


def ld_status(trend_ok, ratios, trend_mode='gate'):
    """Pass/fail of a large-deviation run.

    Needs at least one measured ratio, all of them finite and positive. The
    trend decides the outcome in ``gate`` mode; in ``report`` mode it is
    recorded but does not fail the run.
    """
    if not ratios or not all(math.isfinite(r) and r > 0 for r in ratios):
        return False
    return bool(trend_ok) or trend_mode == 'report'


class ExperimentManager:
    """Runs domination and large-deviation experiments described by a config file"""

    def __init__(self, config_manager=None):
        self.config_manager = config_manager or ConfigManager()

    def run_config(self, config_path, output_dir=None):
        """Run every experiment in ``config_path``.

        Experiments run in file order and each writes ``<name>.csv`` and
        ``<name>.json``; outputs of earlier experiments are kept when a later
        one fails.
        """
        try:
            config = self.config_manager.load_experiment_config(config_path)
        except HeavyTailError as e:
            return {'success': False, 'error': f"{type(e).__name__}: {e}", 'experiments': []}

        out_dir = Path(output_dir or config.run.output_dir)
        results = []
        for spec in config.experiments:
            result = self.run_experiment(spec, config.run, out_dir)
            results.append(result)
            print(result['summary'])

        failed = [r['name'] for r in results if r['status'] in ('failed', 'error')]
        return {
            'success': not failed,
            'experiments': results,
            'failed': failed[0] if failed else None,
            'output_dir': str(out_dir),
            'seed': config.run.seed,
        }

    def run_experiment(self, spec: ExperimentSpec, run: RunSettings, out_dir: Path):
        """Run one experiment; never raises for numerical errors"""
        runners = {
            'domination': self._run_domination,
            'ld_ratio': self._run_ld_ratio,
            'ld_poly': self._run_ld_poly,
        }
        try:
            return runners[spec.kind](spec, run, out_dir)
        except HeavyTailError as e:
            logger.error("experiment %s failed: %s", spec.name, e)
            return {
                'name': spec.name,
                'kind': spec.kind,
                'status': 'error',
                'error': f"{type(e).__name__}: {e}",
                'summary': f"❌ {spec.name}: {type(e).__name__}: {e}",
            }

    def _manifest(self, spec, run, mc, **extra):
        return {
            'experiment': spec.name,
            'kind': spec.kind,
            'created_at': datetime.date.today().isoformat(),
            'seed': mc.seed,
            'seed_source': run.seed_source,
            'monte_carlo': mc.to_dict(),
            'm_grid': [int(m) for m in spec.params['m_grid']],
            'versions': get_versions(),
            **extra,
        }

    def _write(self, spec, out_dir, frame, manifest):
        csv_path = self.config_manager.write_csv(frame, out_dir / f"{spec.name}.csv")
        json_path = self.config_manager.write_json(manifest, out_dir / f"{spec.name}.json")
        return str(csv_path), str(json_path)

    def _run_domination(self, spec, run, out_dir):
        cm = self.config_manager
        mc = run.mc_config(spec.params)
        t_values, relative = cm.t_grid(spec)
        method = spec.params.get('c_method', 'exact')

        frames = []
        per_distribution = []
        for raw in spec.params['distributions']:
            d = cm.build_distribution(raw)
            f = cm.tail_for(spec, d)
            beta = float(raw.get('beta', spec.params.get('beta', default_beta(f))))
            report = dominate_check(d, f, spec.params['m_grid'], t_values, beta, mc,
                                    c_provider=PROVIDERS[method](d, f), t_relative=relative,
                                    strict=False)
            frame = report.to_frame()
            frame.insert(0, 'distribution', d.kind.value)
            frames.append(frame)
            per_distribution.append({
                'distribution': d.describe(),
                'tail': f.describe(),
                'beta': beta,
                'cells': len(report.cells),
                'failures': [{'m': c['m'], 't': c['t']} for c in report.failures],
            })

        frame = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(
            columns=['distribution'] + REPORT_COLUMNS)
        total = len(frame)
        failed = sum(len(p['failures']) for p in per_distribution)
        manifest = self._manifest(spec, run, mc, c_method=method,
                                  t_grid=t_values.to_dict() if isinstance(t_values, TSpan) else t_values,
                                  t_relative_to_t_max=relative, distributions=per_distribution,
                                  passed_cells=total - failed, failed_cells=failed)
        csv_path, json_path = self._write(spec, out_dir, frame, manifest)
        status = 'passed' if failed == 0 else 'failed'
        icon = '✅' if failed == 0 else '❌'
        return {
            'name': spec.name,
            'kind': spec.kind,
            'status': status,
            'rows': total,
            'passed_cells': total - failed,
            'failed_cells': failed,
            'csv': csv_path,
            'json': json_path,
            'summary': f"{icon} {spec.name}: {total - failed}/{total} cells dominated",
        }

    def _skipped(self, spec, reason):
        return {
            'name': spec.name,
            'kind': spec.kind,
            'status': 'skipped',
            'reason': reason,
            'summary': f"⚠️  {spec.name}: skipped ({reason})",
        }

    def _finish_ld(self, spec, run, mc, out_dir, result, d, **extra):
        summary = ld_summary(result)
        largest = max(result.points, key=lambda p: p.m)
        if largest.m >= 2 and largest.skipped is None:
            value, ci = one_sample_lower_bound(d, largest.m, largest.gamma_m, mc,
                                               stream_key=(len(result.points),))
            summary['one_sample_lower_bound'] = {'m': largest.m, 'value': value, 'ci': ci,
                                                 'p_hat': largest.tail.p_hat}
        manifest = self._manifest(spec, run, mc, distribution=d.describe(),
                                  sequence=spec.params['sequence'], result=summary, **extra)
        csv_path, json_path = self._write(spec, out_dir, ld_result_frame(result), manifest)
        measured = [p for p in result.points if p.skipped is None]
        trend_mode = spec.params.get('trend', 'gate')
        ok = ld_status(summary['trend_ok'], [p.ratio for p in measured], trend_mode)
        icon = '✅' if ok else '❌'
        ratios = ', '.join(f"{p.ratio:.3f}" for p in measured)
        trend = 'ok' if summary['trend_ok'] else 'broken'
        if trend_mode == 'report':
            trend += ' (reported only)'
        return {
            'name': spec.name,
            'kind': spec.kind,
            'status': 'passed' if ok else 'failed',
            'ratios': result.ratios,
            'trend_ok': summary['trend_ok'],
            'trend_mode': trend_mode,
            'csv': csv_path,
            'json': json_path,
            'summary': f"{icon} {spec.name}: ratios [{ratios}], trend {trend}",
        }

    def _run_ld_ratio(self, spec, run, out_dir):
        cm = self.config_manager
        d = cm.build_distribution(spec.params['distribution'])
        f = cm.tail_for(spec, d)
        s = cm.build_sequence(spec.params['sequence'])
        if f.alpha is None or f.alpha <= 1:
            return self._skipped(spec, f"{f.family.value} tail is not super-exponential")
        boundary = classify_boundary(f.alpha, s)
        if boundary is not BoundaryClass.ABOVE:
            return self._skipped(spec, f"sequence is {boundary.value}; the single-jump limit needs AboveBoundary")
        mc = run.mc_config(spec.params)
        result = ld_ratio(d, f, s, spec.params['m_grid'], mc, beta=spec.params.get('beta'))
        return self._finish_ld(spec, run, mc, out_dir, result, d, tail=f.describe())

    def _run_ld_poly(self, spec, run, out_dir):
        cm = self.config_manager
        d = cm.build_distribution(spec.params['distribution'])
        s = cm.build_sequence(spec.params['sequence'])
        if d.gamma is None:
            return self._skipped(spec, f"{d.kind.value} is not a polynomial tail")
        try:
            poly_condition(s)
        except ConditionError as e:
            return self._skipped(spec, str(e))
        mc = run.mc_config(spec.params)
        result = ld_poly_limit(d.gamma, s, spec.params['m_grid'], d, mc, beta=spec.params.get('beta'))
        return self._finish_ld(spec, run, mc, out_dir, result, d)
