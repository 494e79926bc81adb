import typing

import enums


class PipelineException(Exception):
    """
    An exception for returning any error that happened in the pipeline
    """

    def __init__(
        self,
        error_code: str,
        error_title: typing.Optional[str] = None,
        error_description: typing.Optional[str] = None,
        exit_code: enums.ExitCode = enums.ExitCode.STAGE_FAILURE,
        stage: typing.Optional[enums.PipelineStage] = None,
    ):
        """
        Create a new pipeline exception

        :param error_code: The error code of the exception
        :type error_code: str
        :param error_title: The title of the exception
        :type error_title: str
        :param error_description: The description of the exception
        :type error_description: str
        :param exit_code: The exit code the command line interface will return
        :type exit_code: enums.ExitCode
        :param stage: The pipeline stage in which the error occurred
        :type stage: enums.PipelineStage
        """
        super().__init__(error_description or error_title or error_code)
        self.error_code = error_code
        self.error_title = error_title
        self.error_description = error_description
        self.exit_code = exit_code
        self.stage = stage

    def __str__(self) -> str:
        message = self.error_code
        if self.error_title is not None:
            message += f": {self.error_title}"
        if self.error_description is not None:
            message += f" - {self.error_description}"
        if self.stage is not None:
            message = f"[{self.stage.value}] {message}"
        return message

    def __reduce__(self):
        # subclass constructors do not accept self.args
        return _restore, (type(self), self.args, self.__dict__)


def _restore(cls: typing.Type[PipelineException], args: tuple, state: dict) -> PipelineException:
    """Rebuild an exception sent back from a worker process without calling its constructor"""
    exception = cls.__new__(cls)
    Exception.__init__(exception, *args)
    exception.__dict__.update(state)
    return exception


class UsageError(PipelineException):
    """The command line or the configuration contained invalid values"""

    def __init__(self, error_code: str, error_title: str = None, error_description: str = None):
        super().__init__(error_code, error_title, error_description, exit_code=enums.ExitCode.USAGE)


class DataError(PipelineException):
    """An input contained invalid data or could not be read"""

    def __init__(
        self,
        error_code: str,
        error_title: str = None,
        error_description: str = None,
        stage: typing.Optional[enums.PipelineStage] = None,
    ):
        super().__init__(error_code, error_title, error_description, exit_code=enums.ExitCode.DATA_ERROR, stage=stage)


class DegenerateRectError(DataError):
    """A rectangle collapsed to zero area, e.g. a sub-pixel box after a transformation"""

    def __init__(self, coordinates: typing.Sequence, reason: str = "The rectangle has no area"):
        """
        New degenerate rectangle error

        :param coordinates: The (left, top, right, bottom) coordinates which were computed
        :param reason: Why the rectangle was rejected
        """
        super().__init__(
            error_code="DEGENERATE_RECT",
            error_title="Degenerate rectangle",
            error_description=f"{reason}: {tuple(coordinates)}",
        )
        self.coordinates = tuple(coordinates)


class StageError(PipelineException):
    """A pipeline stage failed"""

    def __init__(self, stage: enums.PipelineStage, error_description: str, error_code: str = "STAGE_FAILED"):
        super().__init__(
            error_code,
            error_title=f"Stage '{stage.value}' failed",
            error_description=error_description,
            exit_code=enums.ExitCode.STAGE_FAILURE,
            stage=stage,
        )


class DetectorError(PipelineException):
    """A detector failed on a single window. The page is processed without the window's detections"""

    def __init__(self, window_id: int, error_description: str):
        super().__init__(
            "DETECTOR_FAILED",
            error_title=f"Detector failed on window {window_id}",
            error_description=error_description,
            stage=enums.PipelineStage.DETECT,
        )
        self.window_id = window_id
