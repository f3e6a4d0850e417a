import json
import logging
import random
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List

from nambukit.calculus import CalculusException
from nambukit.coeffs import CoeffsException, render
from nambukit.dsl import Command, DSLException, Session
from nambukit.exterior import ExteriorException
from nambukit.gauge import GaugeException
from nambukit.gauge import HypothesesFailed as GaugeHypothesesFailed
from nambukit.gauge import check_characteristic_match, check_leibniz_iso, gauge, gauge_reduce_commute
from nambukit.nambu_core import (
    VERIFIED,
    CheckResult,
    NambuException,
    NambuStructure,
    bracket,
    check_decomposable,
    check_fi,
    graph_closed,
    hamiltonian,
    sharp,
)
from nambukit.oracle import (
    DEFAULT_POINTS,
    OracleResult,
    oracle_adjunction,
    oracle_anchor,
    oracle_bracket,
    oracle_commute,
    oracle_fi,
    oracle_reduce,
)
from nambukit.reduction import HypothesesFailed as ReductionHypothesesFailed
from nambukit.reduction import (
    ReductionException,
    ReductionProblem,
    ann1,
    ann_top,
    check_compatible,
    check_lie_criterion,
    check_sharp_range,
    falsify_canonicity,
    reduce,
    subordinate,
)
from utils.concurrency import ShardException

# Setup logging
logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

DOMAIN_ERRORS = (CoeffsException, ExteriorException, CalculusException, NambuException, ReductionException,
                 GaugeException, DSLException, ShardException)


class CommandFailed(Exception):
    """Exception for a command whose operation raised a domain error"""

    def __init__(self, command: Command, error: Exception):
        self.command, self.error = command, error
        super().__init__(f"line {command.line}: {command.echo}: {type(error).__name__}: {str(error)}")


@dataclass
class Entry:
    """Outcome of one command"""
    line: int
    command: str
    verdict: str
    passed: bool
    output: List[str] = field(default_factory=list)
    witness: Any = None
    seconds: float = 0.0

    def as_dict(self, timing: bool = False) -> Dict[str, Any]:
        data = {
            'line': self.line,
            'command': self.command,
            'verdict': self.verdict,
            'passed': self.passed,
            'output': self.output,
            'witness': _jsonable(self.witness),
        }
        if timing:
            data['seconds'] = round(self.seconds, 6)
        return data


@dataclass
class Report:
    """Ordered command outcomes of one run"""
    seed: int
    entries: List[Entry] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(entry.passed for entry in self.entries)

    def render_text(self, timing: bool = False) -> str:
        lines = []
        for entry in self.entries:
            lines.append(f"[{entry.line}] {entry.command}")
            lines.append(f"  {entry.verdict}")
            lines += [f"  {text}" for text in entry.output]
            if timing:
                lines.append(f"  time: {entry.seconds:.3f}s")
        failed = sum(1 for entry in self.entries if not entry.passed)
        lines.append(f"{len(self.entries)} command(s), {failed} negative verdict(s)")
        return '\n'.join(lines) + '\n'

    def to_json(self, timing: bool = False) -> str:
        data = {
            'schema': SCHEMA_VERSION,
            'seed': self.seed,
            'entries': [entry.as_dict(timing) for entry in self.entries],
            'passed': self.passed,
        }
        return json.dumps(data, indent=2)


def _jsonable(value: Any) -> Any:
    if value is None or isinstance(value, (bool, int, str)):
        return value
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return str(value)


def _check_entry(result: CheckResult) -> Dict[str, Any]:
    return {
        'verdict': 'true' if result.passed else 'false',
        'passed': result.passed,
        'output': [result.detail] if result.detail else [],
        'witness': result.witness,
    }


def _oracle_entry(result: OracleResult, verified: bool) -> Dict[str, Any]:
    verdict = 'match' if result.passed else 'mismatch'
    if verified and not result.passed:
        logger.error(f"Oracle contradicts a symbolically verified identity: {result.identity}")
        verdict = 'engine bug'
    return {
        'verdict': verdict,
        'passed': result.passed,
        'output': result.render(),
        'witness': list(result.mismatches[0]) if result.mismatches else None,
    }


class _Runner:
    """Execute session commands in order against a single seeded generator"""

    def __init__(self, session: Session, seed: int, jobs: int):
        self.session = session
        self.seed = seed
        self.jobs = jobs
        self.rng = random.Random(seed)
        self.handlers: Dict[str, Callable[[Dict[str, Any]], Dict[str, Any]]] = {
            'check_fi': self._check_fi,
            'bracket': self._bracket,
            'sharp': self._sharp,
            'hamiltonian': self._hamiltonian,
            'decomposable': self._decomposable,
            'ann1': self._ann1,
            'anntop': self._anntop,
            'reduce': self._reduce,
            'subordinate': self._subordinate,
            'canonicity': self._canonicity,
            'gauge': self._gauge,
            'commute': self._commute,
            'oracle_fi': self._oracle_fi,
            'oracle_adjunction': self._oracle_adjunction,
            'oracle_anchor': self._oracle_anchor,
            'oracle_bracket': self._oracle_bracket,
            'oracle_reduce': self._oracle_reduce,
            'oracle_commute': self._oracle_commute,
            'sharp_range': self._sharp_range,
            'lie_criterion': self._lie_criterion,
            'compatible': self._compatible,
            'charmatch': self._charmatch,
            'leibniz_iso': self._leibniz_iso,
            'graph_closed': self._graph_closed,
        }

    def structure(self, params: Dict[str, Any], key: str = 'P') -> NambuStructure:
        return self.session.structure(params[key])

    def register(self, params: Dict[str, Any], structure: NambuStructure):
        if 'alias' in params:
            self.session.structures[params['alias']] = structure
            self.session.pending.discard(params['alias'])
            logger.info(f"Registered {params['alias']} = {structure.render()}")

    def problem(self, params: Dict[str, Any]) -> ReductionProblem:
        return ReductionProblem(self.structure(params), params['N'], params['E'], params.get('D'), params.get('map'))

    def _check_fi(self, params):
        result = check_fi(self.structure(params), self.jobs)
        entry = _check_entry(result)
        entry['verdict'] = 'verified' if result.passed else 'refuted'
        return entry

    def _bracket(self, params):
        Pi = self.structure(params)
        value = bracket(Pi, [Pi.chart.lift(f) for f in params['functions']])
        return {'verdict': 'value', 'passed': True, 'output': [render(value)]}

    def _sharp(self, params):
        image = sharp(self.structure(params), params['eta'])
        return {'verdict': 'value', 'passed': True, 'output': [image.render()]}

    def _hamiltonian(self, params):
        Pi = self.structure(params)
        vector = hamiltonian(Pi, [Pi.chart.lift(f) for f in params['functions']])
        return {'verdict': 'value', 'passed': True, 'output': [vector.render()]}

    def _decomposable(self, params):
        result = check_decomposable(self.structure(params))
        entry = _check_entry(result)
        entry['verdict'] = 'decomposable' if result.passed else 'not decomposable'
        return entry

    def _ann1(self, params):
        forms = ann1(params['E'], params['order'])
        return {'verdict': f"{len(forms)} basis form(s)", 'passed': True, 'output': [f.render() for f in forms]}

    def _anntop(self, params):
        forms = ann_top(params['N'], params['order'])
        return {'verdict': f"{len(forms)} basis form(s)", 'passed': True, 'output': [f.render() for f in forms]}

    def _reduce(self, params):
        try:
            reduced = reduce(self.problem(params), self.jobs)
        except ReductionHypothesesFailed as e:
            return {'verdict': 'not reducible', 'passed': False, 'output': e.report.render()}
        self.register(params, reduced.tensor)
        output = reduced.hypothesis_report.render() + [f"reduced: {reduced.render()}"]
        return {'verdict': 'reduced', 'passed': True, 'output': output}

    def _subordinate(self, params):
        Pi = self.structure(params)
        result = subordinate(Pi, [Pi.chart.lift(f) for f in params['functions']], self.jobs)
        self.register(params, result)
        return {'verdict': result.fi_status, 'passed': result.fi_status == VERIFIED,
                'output': [result.render()]}

    def _canonicity(self, params):
        bound = params.get('bound', 1)
        result = falsify_canonicity(self.structure(params), params['E'], bound)
        entry = _check_entry(result)
        entry['verdict'] = f"canonical up to degree {bound}" if result.passed else 'not canonical'
        return entry

    def _gauge(self, params):
        data = gauge(self.structure(params), params['B'], self.jobs)
        self.register(params, data.transported)
        output = [
            f"det: {render(data.det)}",
            f"vanishing locus: {', '.join(data.vanishing_locus) or 'none'}",
            f"transformed: {data.transported.render()}",
        ]
        return {'verdict': data.transported.fi_status, 'passed': data.transported.fi_status == VERIFIED,
                'output': output}

    def _commute(self, params):
        try:
            result = gauge_reduce_commute(self.problem(params), params['B'], jobs=self.jobs)
        except GaugeHypothesesFailed as e:
            return {'verdict': f"hypothesis ({e.hypothesis}) failed", 'passed': False, 'output': [str(e)]}
        output = [
            f"projected form: {result.projected_form.render()}",
            f"gauge then reduce: {result.gauge_then_reduce.render()}",
            f"reduce then gauge: {result.reduce_then_gauge.render()}",
            f"licensed by: {result.licensed_by}",
        ]
        return {'verdict': 'commutes' if result.agree else 'differs', 'passed': result.agree, 'output': output}

    def points(self, params: Dict[str, Any]) -> int:
        return params.get('points', DEFAULT_POINTS)

    def _oracle_fi(self, params):
        Pi = self.structure(params)
        return _oracle_entry(oracle_fi(Pi, self.points(params), self.rng), Pi.fi_status == VERIFIED)

    def _oracle_adjunction(self, params):
        return _oracle_entry(oracle_adjunction(self.session.chart, self.points(params), self.rng), True)

    def _oracle_anchor(self, params):
        return _oracle_entry(oracle_anchor(self.structure(params), params['B'], self.points(params), self.rng), True)

    def _oracle_bracket(self, params):
        return _oracle_entry(oracle_bracket(self.structure(params), self.points(params), self.rng), True)

    def _oracle_reduce(self, params):
        problem = self.problem(params)
        try:
            reduced = reduce(problem, self.jobs)
        except ReductionHypothesesFailed as e:
            return {'verdict': 'not reducible', 'passed': False, 'output': e.report.render()}
        return _oracle_entry(oracle_reduce(problem, reduced, self.points(params), self.rng), True)

    def _oracle_commute(self, params):
        problem = self.problem(params)
        try:
            result = gauge_reduce_commute(problem, params['B'], jobs=self.jobs)
        except GaugeHypothesesFailed as e:
            return {'verdict': f"hypothesis ({e.hypothesis}) failed", 'passed': False, 'output': [str(e)]}
        return _oracle_entry(oracle_commute(problem, params['B'], result, self.points(params), self.rng),
                             result.agree)

    def _sharp_range(self, params):
        return _check_entry(check_sharp_range(self.problem(params), params['target']))

    def _lie_criterion(self, params):
        return _check_entry(check_lie_criterion(self.problem(params), params['frame']))

    def _compatible(self, params):
        E = params['E']
        return _check_entry(check_compatible(params['theta'], E, E.base, params.get('bound', 2)))

    def _charmatch(self, params):
        result = check_characteristic_match(self.structure(params), self.structure(params, 'Q'),
                                            params.get('points', 50), self.seed)
        return _check_entry(result)

    def _leibniz_iso(self, params):
        return _check_entry(check_leibniz_iso(self.structure(params), params['B'], self.jobs))

    def _graph_closed(self, params):
        return _check_entry(graph_closed(self.structure(params)))

    def execute(self, command: Command) -> Entry:
        started = time.perf_counter()
        try:
            fields = self.handlers[command.kind](command.params)
        except DOMAIN_ERRORS as e:
            logger.error(f"Command at line {command.line} failed: {str(e)}")
            raise CommandFailed(command, e)
        entry = Entry(command.line, command.echo, fields['verdict'], fields['passed'], fields.get('output', []),
                      fields.get('witness'), time.perf_counter() - started)
        logger.debug(f"Line {command.line}: {entry.verdict}")
        return entry


def run(session: Session, seed: int = 0, jobs: int = 1) -> Report:
    """
    Execute the commands of a parsed session in order

    Args:
        session: Parsed session; `as NAME` results are registered into it
        seed: Seed for the random-point oracle and sampled checks
        jobs: Shard count for parallel checks

    Returns:
        Report with one entry per command

    Raises:
        CommandFailed: If a command raises a domain error
    """
    runner = _Runner(session, seed, jobs)
    report = Report(seed)
    for command in session.commands:
        report.entries.append(runner.execute(command))
    logger.info(f"Ran {len(report.entries)} command(s) with seed {seed}: "
                f"{'all passed' if report.passed else 'negative verdicts present'}")
    return report
