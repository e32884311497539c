import asyncio
import threading
import logging

from .logger import NamedLogger

module_logger = logging.getLogger(__name__)
"""
The default logger of this module
"""


class AsyncInThread:
    """
    This class runs a coroutine to completion on an asyncio loop that lives
    in its own thread.

    The crawler is written with ``asyncio`` but its public functions are
    blocking. Calling :py:func:`asyncio.run` from them would fail whenever
    the caller already runs a loop (a notebook, an ``aiohttp`` test, another
    crawler). Hosting the loop in a separate thread works in both cases.

    Inside the coroutine, the running loop has an extra attribute
    ``thread_controller`` with a reference to the ``AsyncInThread`` object.

    Example:

    .. code-block:: python

        from geofeedkit.async_in_thread import AsyncInThread

        async def main_task():
            await asyncio.sleep(1)
            return 42

        assert AsyncInThread(main_task()).run() == 42
    """

    def __init__(self, coro, name="AsyncThread", log=module_logger):
        """
        :param coroutine coro: a coroutine, the main task. When :py:meth:`stop` is executed,
            the task is cancelled. The task is responsible to cancel other tasks
            that it might have spawned.
        :param str name: a string used in logging and for the name of the
            thread
        :param logging.Logger log: the logger where debug info is logged to.
        """
        self.loop = None
        self.coro = coro
        self.name = name
        self.main_task = None
        self.th = None
        self.log = NamedLogger(log, {"name": name})
        self._ready = threading.Event()
        self._result = None
        self._exception = None

    def start(self):
        self.log.debug("Starting thread to boot up the asyncio loop")
        self.th = threading.Thread(target=self.__running_app__, name=self.name)
        self.th.start()
        self._ready.wait()

    def stop(self):
        """
        Cancels the main task and waits for the thread to finish.
        """
        self.log.debug("Stopping thread that runs the asyncio loop")
        if self.th is None:
            return

        loop = self.loop
        if loop is not None and not loop.is_closed():
            self.log.debug("Scheduling cancellation of the main task")
            try:
                loop.call_soon_threadsafe(self.main_task.cancel)
            except RuntimeError:
                # loop closed in between, the task has finished already
                pass

        self.log.debug("Joining thread")
        self.th.join()

    def run(self):
        """
        Starts the thread, waits for the main task and returns its result.

        :return: the value returned by the coroutine
        :raise: whatever the coroutine raised
        """
        self.start()
        try:
            self.th.join()
        except KeyboardInterrupt:
            self.stop()
            raise

        if self._exception is not None:
            raise self._exception
        return self._result

    def __running_app__(self):
        """
        This is the thread that starts the new IO loop
        """
        self.log.debug("In thread: creating and starting new asyncio loop")
        self.loop = asyncio.new_event_loop()
        self.loop.thread_controller = self
        asyncio.set_event_loop(self.loop)
        self.main_task = self.loop.create_task(self.coro)
        self._ready.set()
        try:
            self._result = self.loop.run_until_complete(self.main_task)
        except asyncio.CancelledError as e:
            self.log.debug("Main task was cancelled")
            self._exception = e
        except BaseException as e:
            self.log.debug("Main task raised %r", e)
            self._exception = e
        finally:
            try:
                self.loop.run_until_complete(self.loop.shutdown_asyncgens())
            finally:
                self.log.debug("Closing asyncio loop")
                self.loop.close()


def run_coroutine(coro, name="AsyncThread"):
    """
    Shorthand for ``AsyncInThread(coro, name).run()``.
    """
    return AsyncInThread(coro, name).run()
