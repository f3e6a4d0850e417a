import pytest
from utils.concurrency import retry, run_sharded, run_sharded_async, split_shards, ShardException


def test_retry_recovers():
    """Test retry succeeds after transient failures"""
    calls = []

    @retry(max_retries=5, exceptions=(ValueError,))
    def flaky():
        calls.append(1)
        if len(calls) < 3:
            raise ValueError('transient')
        return 'ok'

    assert flaky() == 'ok'
    assert len(calls) == 3


def test_retry_gives_up():
    """Test retry re-raises the last failure after max attempts"""
    calls = []

    @retry(max_retries=4, exceptions=(ValueError,))
    def always_fails():
        calls.append(1)
        raise ValueError(f"attempt {len(calls)}")

    with pytest.raises(ValueError) as exc_info:
        always_fails()
    assert len(calls) == 4
    assert 'attempt 4' in str(exc_info.value)


def test_retry_ignores_other_exceptions():
    """Test retry does not catch unlisted exception types"""
    calls = []

    @retry(max_retries=4, exceptions=(ValueError,))
    def broken():
        calls.append(1)
        raise KeyError('no')

    with pytest.raises(KeyError):
        broken()
    assert len(calls) == 1


def test_split_shards_preserves_order():
    """Test shards are contiguous and cover every item"""
    shards = split_shards(list(range(10)), 3)
    assert shards == [[0, 1, 2, 3], [4, 5, 6], [7, 8, 9]]


def test_split_shards_caps_job_count():
    """Test there are never more shards than items"""
    assert split_shards([1, 2], 8) == [[1], [2]]
    assert split_shards([], 4) == [[]]


def test_run_sharded_single_job():
    """Test jobs=1 runs one shard in the calling thread"""
    assert run_sharded(sum, [1, 2, 3], jobs=1) == [6]


def test_run_sharded_parallel():
    """Test shard results come back in shard order"""
    assert run_sharded(sum, list(range(1, 7)), jobs=3) == [3, 7, 11]


@pytest.mark.asyncio
async def test_run_sharded_async():
    """Test the awaitable runner from inside an event loop"""
    results = await run_sharded_async(len, list(range(9)), 3)
    assert results == [3, 3, 3]


@pytest.mark.asyncio
async def test_run_sharded_async_failure():
    """Test a failing shard raises ShardException"""
    def check(shard):
        if 0 in shard:
            raise RuntimeError('bad shard')
        return len(shard)

    with pytest.raises(ShardException) as exc_info:
        await run_sharded_async(check, list(range(4)), 2)
    assert 'bad shard' in str(exc_info.value)
