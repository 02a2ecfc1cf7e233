"""Main orchestrator and command-line entry point for the rough Bergomi VIX toolkit."""

import argparse
import logging
import sys
from typing import Any, Dict, List, Literal, Optional, Sequence

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, ValidationError

from config import Config
from engines.calibration_engine import (calibrate_futures, calibrate_spx, calibration_summary, precompute_paths,
                                        quotes_from_records)
from engines.essvi_engine import EssviParams, EssviSurface, OptionQuote, fit_essvi
from engines.spx_engine import SpxEngine
from engines.vix_engine import VixEngine
from tools.bss import TimeGrid
from tools.errors import ArbitrageError, RoughVolError, StageError
from tools.model import ForwardVarianceCurve, ModelParams
from tools.quote_tool import QuoteTool
from tools.report_tool import ReportTool

# Configure logging
logging.basicConfig(level=getattr(logging, Config.LOG_LEVEL.upper(), logging.INFO),
                    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_STAGE_FAILURE = 1
EXIT_USAGE = 2
EXIT_ARBITRAGE = 3

CALIBRATION_STAGES = ("essvi", "xi0", "futures", "spx")

VIX_FUTURES_COLUMNS = ['T', 'lower_bound', 'upper_bound', 'mc_hsfe', 'mc_hsfe_se', 'mc_cholesky',
                       'mc_cholesky_se', 'lognormal_exact', 'lognormal_bfg']
SMILE_COLUMNS = ['maturity_years', 'strike', 'call_price', 'std_error', 'implied_vol']


class _Block(BaseModel):
    model_config = ConfigDict(extra='forbid')


class ModelBlock(_Block):
    H: float = Field(0.07, gt=0.0, lt=0.5)
    nu: float = Field(1.2287, ge=0.0)
    rho: float = Field(-0.9, gt=-1.0, lt=1.0)
    kappa: int = Field(Config.DEFAULT_KAPPA, ge=1)

    def build(self) -> ModelParams:
        return ModelParams(H=self.H, nu=self.nu, rho=self.rho, kappa=self.kappa)


class CurveBlock(_Block):
    """Either a scenario number, an explicit kind, or a curve JSON file."""

    scenario: Optional[Literal[1, 2, 3]] = None
    kind: Literal['flat', 'scenario2', 'scenario3', 'spline'] = 'flat'
    level: PositiveFloat = 0.235 ** 2
    knots: List[List[float]] = Field(default_factory=list)
    path: Optional[str] = None

    def build(self, quote_tool: QuoteTool) -> ForwardVarianceCurve:
        if self.path:
            return ForwardVarianceCurve.from_dict(quote_tool.load_json(self.path))
        if self.scenario is not None:
            return ForwardVarianceCurve.scenario(self.scenario, self.level)
        if self.kind == 'spline':
            return ForwardVarianceCurve('spline', knots=tuple(tuple(k) for k in self.knots))
        return ForwardVarianceCurve(self.kind, level=self.level)


class VixFuturesBlock(_Block):
    maturities: List[PositiveFloat] = Field(default_factory=lambda: [0.1, 0.25, 0.5, 1.0, 1.5, 2.0], min_length=1)
    paths: int = Field(10_000, ge=2)
    n_points: int = Field(Config.DEFAULT_VIX_POINTS, ge=2)
    engines: List[Literal['hsfe', 'cholesky']] = Field(default_factory=lambda: ['hsfe', 'cholesky'])
    steps_per_year: int = Field(Config.STEPS_PER_YEAR, ge=2)
    moments_nodes: int = Field(Config.MOMENTS_GL_NODES, ge=2)


class VixOptionsBlock(_Block):
    maturity: PositiveFloat = 0.5
    strikes: List[PositiveFloat] = Field(default_factory=lambda: [0.15, 0.18, 0.2, 0.22, 0.25, 0.3], min_length=1)
    paths: int = Field(10_000, ge=2)
    n_points: int = Field(Config.DEFAULT_VIX_POINTS, ge=2)
    engine: Literal['hsfe', 'cholesky'] = 'cholesky'
    moments_nodes: int = Field(Config.MOMENTS_GL_NODES, ge=2)


class EssviInitBlock(_Block):
    eta: PositiveFloat = 1.0
    lam: float = Field(0.4, ge=0.0, le=1.0)
    A: float = Field(-0.5, gt=-1.0, lt=1.0)
    B: float = Field(1.0, ge=0.0)
    C: float = Field(-0.5, gt=-1.0, lt=1.0)

    def build(self) -> EssviParams:
        return EssviParams(eta=self.eta, lam=self.lam, A=self.A, B=self.B, C=self.C)


class EssviFitBlock(_Block):
    quotes: Optional[str] = None
    init: EssviInitBlock = Field(default_factory=EssviInitBlock)
    fixed: Dict[Literal['eta', 'lam', 'A', 'B', 'C'], float] = Field(default_factory=dict)


class VarswapBlock(_Block):
    surface: Optional[str] = None
    maturities: Optional[List[PositiveFloat]] = None
    replication: bool = True


class CalibrateBlock(_Block):
    options_quotes: Optional[str] = None
    futures_quotes: Optional[str] = None
    calls_quotes: Optional[str] = None
    essvi_init: EssviInitBlock = Field(default_factory=EssviInitBlock)
    futures_init: List[float] = Field(default_factory=lambda: [0.5, 0.2], min_length=2, max_length=2)
    spx_init: List[float] = Field(default_factory=lambda: [1.0, -0.5], min_length=2, max_length=2)
    paths: int = Field(20_000, ge=2)
    steps_per_year: int = Field(Config.SPX_STEPS_PER_YEAR, ge=2)


class SmileBlock(_Block):
    maturities: List[PositiveFloat] = Field(default_factory=lambda: [0.25, 0.5, 1.0], min_length=1)
    strikes: List[PositiveFloat] = Field(default_factory=lambda: [0.8, 0.9, 1.0, 1.1, 1.2], min_length=1)
    paths: int = Field(50_000, ge=2)
    scheme: Literal['log_euler', 'price_euler'] = 'log_euler'
    steps_per_year: int = Field(Config.SPX_STEPS_PER_YEAR, ge=2)
    antithetic: bool = False


class RunConfig(_Block):
    """One JSON document per run; unknown keys are rejected."""

    seed: int = Field(Config.SEED, ge=0)
    threads: int = Field(Config.THREADS, ge=1)
    out: str = Config.OUTPUT_DIR
    excel: bool = False
    model: ModelBlock = Field(default_factory=ModelBlock)
    curve: CurveBlock = Field(default_factory=CurveBlock)
    vix_futures: VixFuturesBlock = Field(default_factory=VixFuturesBlock)
    vix_options: VixOptionsBlock = Field(default_factory=VixOptionsBlock)
    essvi_fit: EssviFitBlock = Field(default_factory=EssviFitBlock)
    varswap: VarswapBlock = Field(default_factory=VarswapBlock)
    calibrate: CalibrateBlock = Field(default_factory=CalibrateBlock)
    smile: SmileBlock = Field(default_factory=SmileBlock)


class RoughVolToolkit:
    """Runs the pricing and calibration pipelines and writes their reports."""

    def __init__(self, run_config: Optional[RunConfig] = None):
        """Initialize the toolkit with its tools."""
        try:
            Config.validate_config()
            self.run_config = run_config or RunConfig()
            self.quote_tool = QuoteTool()
            self.report_tool = ReportTool(self.run_config.out)
            logger.info("RoughVolToolkit initialized successfully")
        except Exception as e:
            logger.error(f"Failed to initialize RoughVolToolkit: {e}")
            raise

    @property
    def params(self) -> ModelParams:
        return self.run_config.model.build()

    def curve(self) -> ForwardVarianceCurve:
        return self.run_config.curve.build(self.quote_tool)

    def _finish(self) -> None:
        if self.run_config.excel:
            self.report_tool.save_workbook()

    def _finish_stage(self, summary: Dict[str, Any]) -> Dict[str, Any]:
        self._finish()
        return summary

    def run_vix_futures(self) -> str:
        """
        Bounds, Monte-Carlo and log-normal VIX futures over the configured maturities.

        Returns:
            Path to vix_futures.csv
        """
        block = self.run_config.vix_futures
        engine = VixEngine(self.curve(), self.params, n_points=block.n_points, seed=self.run_config.seed,
                           threads=self.run_config.threads, steps_per_year=block.steps_per_year,
                           moments_nodes=block.moments_nodes)
        rows = engine.futures_table(block.maturities, block.paths, engines=block.engines)
        path = self.report_tool.save_table(rows, 'vix_futures', VIX_FUTURES_COLUMNS)
        self._finish()
        return path

    def run_vix_options(self) -> str:
        """Log-normal against Monte-Carlo VIX calls and puts over strikes."""
        block = self.run_config.vix_options
        engine = VixEngine(self.curve(), self.params, n_points=block.n_points, seed=self.run_config.seed,
                           threads=self.run_config.threads, moments_nodes=block.moments_nodes)
        rows = engine.options_table(block.maturity, block.strikes, block.paths, block.engine)
        path = self.report_tool.save_table(rows, 'vix_options')
        self._finish()
        return path

    def _load_option_quotes(self, path: str) -> List[OptionQuote]:
        frame = self.quote_tool.load_quotes(path, 'options')
        return [OptionQuote(r['maturity_years'], r['strike'], r['forward'], r['implied_vol'], r['weight'])
                for r in frame.to_dict(orient='records')]

    def _fit_surface(self, quotes_path: str, init: EssviInitBlock,
                     fixed: Optional[Dict[str, float]] = None) -> EssviSurface:
        quotes = self._load_option_quotes(quotes_path)
        params, report = fit_essvi(quotes, init.build(), fixed=fixed)
        surface = EssviSurface(params)
        self.report_tool.save_json(surface.to_dict(), 'essvi_surface')
        self.report_tool.save_json(report.to_dict(), 'essvi_fit_report')
        self.report_tool.save_table(surface.arbitrage_report(), 'essvi_arbitrage')
        if not surface.is_arbitrage_free():
            raise ArbitrageError("fitted eSSVI surface fails a knot arbitrage check")
        return surface

    def _save_varswap(self, surface: EssviSurface, maturities: Optional[Sequence[float]] = None,
                      replication: bool = False) -> ForwardVarianceCurve:
        self.report_tool.save_table(surface.varswap_table(maturities, replication), 'varswap')
        curve = surface.forward_variance_curve(maturities)
        self.report_tool.save_json(curve.to_dict(), 'xi0_curve')
        return curve

    def run_essvi_fit(self) -> str:
        """Fit the eSSVI surface to option quotes and save it."""
        block = self.run_config.essvi_fit
        if not block.quotes:
            raise ValueError("essvi_fit.quotes must name an option quote CSV")
        self._fit_surface(block.quotes, block.init, block.fixed)
        self._finish()
        return str(self.report_tool.output_dir / 'essvi_surface.json')

    def run_varswap(self) -> str:
        """Variance-swap strikes, replication cross-check and xi0 of a fitted surface."""
        block = self.run_config.varswap
        if not block.surface:
            raise ValueError("varswap.surface must name a fitted-surface JSON")
        surface = EssviSurface.from_dict(self.quote_tool.load_json(block.surface))
        self._save_varswap(surface, block.maturities, block.replication)
        self._finish()
        if not surface.is_arbitrage_free():
            raise ArbitrageError("surface fails a knot arbitrage check")
        return str(self.report_tool.output_dir / 'varswap.csv')

    def _stage(self, name: str, action, *args):
        logger.info(f"Stage '{name}' started")
        try:
            result = action(*args)
        except (ArbitrageError, StageError):
            raise
        except Exception as e:
            logger.error(f"Stage '{name}' failed: {e}")
            raise StageError(name, str(e)) from e
        logger.info(f"Stage '{name}' completed")
        return result

    def run_calibrate(self, stage: Optional[str] = None) -> Dict[str, Any]:
        """
        eSSVI fit, xi0 extraction, (H, nu) futures fit and optional (nu, rho) SPX fit.

        Args:
            stage: Last stage to run; None runs every stage

        Returns:
            Summary of what each stage produced
        """
        if stage is not None and stage not in CALIBRATION_STAGES:
            raise ValueError(f"Unknown stage '{stage}', expected one of {CALIBRATION_STAGES}")
        block = self.run_config.calibrate
        stop = CALIBRATION_STAGES.index(stage) if stage else len(CALIBRATION_STAGES) - 1
        summary: Dict[str, Any] = {}

        if block.options_quotes:
            surface = self._stage('essvi', self._fit_surface, block.options_quotes, block.essvi_init)
            summary['essvi'] = surface.to_dict()
            if stop == 0:
                return self._finish_stage(summary)
            xi0 = self._stage('xi0', self._save_varswap, surface)
            summary['xi0'] = xi0.to_dict()
        elif stop == 0:
            raise ValueError("calibrate --stage essvi needs calibrate.options_quotes to name an option quote CSV")
        else:
            logger.info("No option quotes configured; using the configured forward-variance curve")
            xi0 = self._stage('xi0', self.curve)
        if stop == 1:
            return self._finish_stage(summary)

        def fit_futures():
            if not block.futures_quotes:
                raise ValueError("calibrate.futures_quotes must name a futures quote CSV")
            quotes = quotes_from_records(self.quote_tool.load_records(block.futures_quotes, 'futures'), 'futures')
            result = calibrate_futures(quotes, xi0, init=tuple(block.futures_init), rho=self.params.rho,
                                       kappa=self.params.kappa)
            self.report_tool.save_json(result.to_dict(), 'futures_calibration')
            self.report_tool.save_table(calibration_summary(result, quotes), 'futures_residuals')
            return result

        futures = self._stage('futures', fit_futures)
        summary['futures'] = futures.to_dict()

        if stop >= 3 and block.calls_quotes:
            def fit_spx():
                quotes = quotes_from_records(self.quote_tool.load_records(block.calls_quotes, 'calls'), 'calls')
                grid = TimeGrid(n=block.steps_per_year, T=max(q.maturity for q in quotes))
                pre = precompute_paths(futures.params.H, grid, block.paths, self.run_config.seed,
                                       futures.params.kappa, self.run_config.threads)
                result = calibrate_spx(pre, xi0, quotes, init=tuple(block.spx_init))
                self.report_tool.save_json(result.to_dict(), 'spx_calibration')
                self.report_tool.save_table(calibration_summary(result, quotes), 'spx_residuals')
                return result

            summary['spx'] = self._stage('spx', fit_spx).to_dict()

        self._finish()
        return summary

    def run_smile(self) -> str:
        """Monte-Carlo SPX smile; columns maturity_years, strike, call_price, std_error, implied_vol."""
        block = self.run_config.smile
        engine = SpxEngine(self.curve(), self.params, paths=block.paths, steps_per_year=block.steps_per_year,
                           scheme=block.scheme, seed=self.run_config.seed, threads=self.run_config.threads,
                           antithetic=block.antithetic)
        points = engine.smile(block.maturities, block.strikes)
        rows = [{'maturity_years': p.maturity, 'strike': p.strike, 'call_price': p.call_price,
                 'std_error': p.std_error, 'implied_vol': p.implied_vol} for p in points]
        path = self.report_tool.save_table(rows, 'smile', SMILE_COLUMNS)
        self._finish()
        return path


HELP_EPILOG = """
output tables (CSV, one header row):
  vix-futures  vix_futures.csv: T [years], lower_bound, upper_bound, mc_hsfe, mc_hsfe_se,
               mc_cholesky, mc_cholesky_se, lognormal_exact, lognormal_bfg [VIX points, volatility units]
  vix-options  vix_options.csv: T [years], strike [VIX points], future_*, call_*, put_* [VIX points]
  essvi-fit    essvi_surface.json {eta, lambda, A, B, C, theta_knots:[[t, theta], ...]},
               essvi_fit_report.json, essvi_arbitrage.csv (margins at each knot)
  varswap      varswap.csv: maturity_years, total_variance [variance x years], varswap_vol [annualised],
               xi0 [variance per year], log_contract_variance [variance x years]; xi0_curve.json
  calibrate    the essvi-fit and varswap outputs, futures_calibration.json, futures_residuals.csv,
               spx_calibration.json, spx_residuals.csv [prices in quote units]
  smile        smile.csv: maturity_years, strike [S0 = 1], call_price, std_error, implied_vol [annualised]

quote files:
  options  maturity_years, strike, forward, implied_vol, weight (optional)
  futures  maturity_years, price
  calls    maturity_years, strike, price

exit codes: 0 success, 1 stage failure, 2 usage or configuration error, 3 arbitrage check failed
"""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='roughvol',
        description='Rough Bergomi VIX/SPX pricing and calibration toolkit',
        epilog=HELP_EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument('command', choices=['vix-futures', 'vix-options', 'calibrate', 'smile',
                                            'essvi-fit', 'varswap'])
    parser.add_argument('--config', help='JSON run configuration')
    parser.add_argument('--seed', type=int, help='RNG seed (overrides the config)')
    parser.add_argument('--threads', type=int, help='worker threads for path simulation (env ROUGHVOL_THREADS)')
    parser.add_argument('--out', help='output directory')
    parser.add_argument('--stage', choices=CALIBRATION_STAGES, help='calibrate: stop after this stage')
    parser.add_argument('--excel', action='store_true', help='also write every table into report.xlsx')
    return parser


def load_run_config(args: argparse.Namespace, quote_tool: Optional[QuoteTool] = None) -> RunConfig:
    """Read the JSON config (if any) and apply command-line overrides."""
    data = (quote_tool or QuoteTool()).load_json(args.config) if args.config else {}
    run_config = RunConfig.model_validate(data)
    overrides = {key: getattr(args, key) for key in ('seed', 'threads', 'out') if getattr(args, key) is not None}
    if args.excel:
        overrides['excel'] = True
    return RunConfig.model_validate({**run_config.model_dump(), **overrides})


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE

    try:
        run_config = load_run_config(args)
        toolkit = RoughVolToolkit(run_config)
    except (ValidationError, ValueError, FileNotFoundError) as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_USAGE

    commands = {
        'vix-futures': toolkit.run_vix_futures,
        'vix-options': toolkit.run_vix_options,
        'calibrate': lambda: toolkit.run_calibrate(args.stage),
        'smile': toolkit.run_smile,
        'essvi-fit': toolkit.run_essvi_fit,
        'varswap': toolkit.run_varswap,
    }
    try:
        result = commands[args.command]()
        logger.info(f"{args.command} completed: {result if isinstance(result, str) else 'see output directory'}")
        return EXIT_OK
    except ArbitrageError as e:
        logger.error(f"Arbitrage check failed: {e}")
        return EXIT_ARBITRAGE
    except StageError as e:
        logger.error(f"Stage '{e.stage}' failed: {e}")
        return EXIT_STAGE_FAILURE
    except RoughVolError as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_STAGE_FAILURE
    except (ValueError, FileNotFoundError) as e:
        logger.error(f"{args.command} could not run: {e}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
