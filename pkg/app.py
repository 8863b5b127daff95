import os

from flask import Flask, jsonify, request

from utils.concentration import bound, bound_to_dict, default_beta, solve_t_max
from utils.config_manager import ConfigManager, to_jsonable
from utils.errors import DomainError, HeavyTailError
from utils.truncation import PROVIDERS, all_estimates, constant_c_provider
from utils.version_detect import get_versions

app = Flask(__name__)

DEBUG_ENV = 'HEAVYTAIL_DEBUG'

config_manager = ConfigManager()

FAMILIES = {
    'subexp': {'distribution': 'exponential', 'params': ['k'], 'optional': ['mean']},
    'subweibull': {'distribution': 'weibull', 'params': ['alpha', 'c_alpha'], 'optional': []},
    'polynomial': {'distribution': 'pareto', 'params': ['gamma'], 'optional': []},
}
C_METHODS = ['exact', 'ratio', 'closed', 'constant']


class BadRequest(Exception):
    """Malformed request body (HTTP 400)"""


def _payload():
    data = request.get_json(silent=True)
    if not isinstance(data, dict):
        raise BadRequest('Request body must be a JSON object')
    return data


def _number(data, key, cast=float, required=True, default=None):
    if key not in data or data[key] is None:
        if required:
            raise BadRequest(f"'{key}' is required")
        return default
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise BadRequest(f"'{key}' must be a number")
    if cast is int and int(value) != value:
        raise BadRequest(f"'{key}' must be an integer")
    return cast(value)


def _family(data):
    tail = data.get('tail')
    if tail not in FAMILIES:
        raise BadRequest(f"'tail' must be one of {', '.join(FAMILIES)}")
    spec = FAMILIES[tail]
    params = {name: _number(data, name) for name in spec['params']}
    try:
        d = config_manager.build_distribution({'kind': spec['distribution'], **params})
        f = config_manager.build_tail({'family': tail, **params})
    except DomainError as e:
        raise BadRequest(str(e))
    return d, f


def _beta(data, f, required=False):
    beta = _number(data, 'beta', required=required)
    if beta is None:
        return default_beta(f)
    if not 0 < beta <= 1:
        raise BadRequest("'beta' must lie in (0, 1]")
    return beta


def _provider(data, d, f):
    method = data.get('c_method', 'closed')
    if method not in C_METHODS:
        raise BadRequest(f"'c_method' must be one of {', '.join(C_METHODS)}")
    if method == 'constant':
        value = _number(data, 'c_value')
        if value <= 0:
            raise BadRequest("'c_value' must be > 0")
        return constant_c_provider(value)
    if method == 'closed':
        return PROVIDERS['closed'](d, f, mean=_number(data, 'mean', required=False))
    return PROVIDERS[method](d, f)


def _handle(compute):
    try:
        return jsonify(to_jsonable({'success': True, **compute(_payload())}))
    except BadRequest as e:
        return jsonify({'success': False, 'error': str(e)}), 400
    except HeavyTailError as e:
        return jsonify({'success': False, 'error': f"{type(e).__name__}: {e}"}), 422


@app.route('/')
def index():
    """Service description"""
    return jsonify({
        'service': 'heavytail',
        'endpoints': ['/api/families', '/api/bound', '/api/cbeta', '/api/tmax'],
        'versions': get_versions(),
    })


@app.route('/api/families')
def families():
    """Supported tail families and their parameters"""
    return jsonify({'families': FAMILIES, 'c_methods': C_METHODS})


@app.route('/api/bound', methods=['POST'])
def api_bound():
    def compute(data):
        d, f = _family(data)
        m = _number(data, 'm', int)
        t = _number(data, 't')
        if m < 1 or t < 0:
            raise BadRequest("'m' must be >= 1 and 't' >= 0")
        provider = _provider(data, d, f)
        result = bound_to_dict(bound(f, provider, m, t, _beta(data, f)))
        return {'bound': result, 'c_method': provider.name}
    return _handle(compute)


@app.route('/api/cbeta', methods=['POST'])
def api_cbeta():
    def compute(data):
        d, f = _family(data)
        L = _number(data, 'L')
        if L <= 0:
            raise BadRequest("'L' must be > 0")
        beta = _beta(data, f, required=True)
        return {'L': L, 'beta': beta,
                'estimates': all_estimates(d, f, L, beta, mean=_number(data, 'mean', required=False))}
    return _handle(compute)


@app.route('/api/tmax', methods=['POST'])
def api_tmax():
    def compute(data):
        d, f = _family(data)
        m = _number(data, 'm', int)
        if m < 1:
            raise BadRequest("'m' must be >= 1")
        beta = _beta(data, f)
        provider = _provider(data, d, f)
        return {'t_max': solve_t_max(f, provider, m, beta), 'm': m, 'beta': beta,
                'c_method': provider.name}
    return _handle(compute)


def server_options(environ=None):
    """Local-only by default; the debugger only when HEAVYTAIL_DEBUG=1."""
    environ = os.environ if environ is None else environ
    return {'debug': environ.get(DEBUG_ENV) == '1', 'host': '127.0.0.1', 'port': 5001}


if __name__ == '__main__':
    versions = get_versions()
    print(f"🔢 numpy {versions['numpy']}, scipy {versions['scipy']}, pandas {versions['pandas']}")
    print("🚀 Starting heavy-tail bound service...")
    print("🌐 Open http://localhost:5001/api/families in your browser")

    app.run(**server_options())
