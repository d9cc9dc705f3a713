from __future__ import annotations

from django.db import models

from core.models import RunRecordModel, TimeStampedModel


class ExperimentRun(RunRecordModel):
    subcommand = models.CharField(max_length=32)
    config = models.JSONField(blank=True, default=dict)
    report = models.JSONField(blank=True, default=dict)
    exit_code = models.PositiveSmallIntegerField(null=True, blank=True)
    passed = models.BooleanField(null=True, blank=True)

    class Meta:
        ordering = ["-started_at"]
        indexes = [
            models.Index(fields=["subcommand", "started_at"]),
        ]

    def __str__(self) -> str:
        return f"{self.subcommand} ({self.status})"


class ExperimentLogEvent(TimeStampedModel):
    LEVEL_INFO = "info"
    LEVEL_WARN = "warn"
    LEVEL_ERROR = "error"

    STEP_CONFIG = "config"
    STEP_SCAN = "scan"
    STEP_CONSTANTS = "constants"
    STEP_VERIFICATION = "verification"
    STEP_REPORT = "report"
    STEP_ERROR = "error"

    LEVEL_CHOICES = [
        (LEVEL_INFO, "Info"),
        (LEVEL_WARN, "Warn"),
        (LEVEL_ERROR, "Error"),
    ]

    STEP_CHOICES = [
        (STEP_CONFIG, "Resolved config"),
        (STEP_SCAN, "Scan"),
        (STEP_CONSTANTS, "Constants"),
        (STEP_VERIFICATION, "Verification"),
        (STEP_REPORT, "Report"),
        (STEP_ERROR, "Error"),
    ]

    run = models.ForeignKey(ExperimentRun, null=True, blank=True, on_delete=models.SET_NULL, related_name="logs")
    step = models.CharField(max_length=64, choices=STEP_CHOICES, default=STEP_CONFIG)
    level = models.CharField(max_length=16, choices=LEVEL_CHOICES, default=LEVEL_INFO)
    message = models.CharField(max_length=255, blank=True, default="")
    content = models.TextField(blank=True, default="")
    metadata = models.JSONField(blank=True, default=dict)

    class Meta:
        ordering = ["-created_at"]
        indexes = [
            models.Index(fields=["step", "created_at"]),
            models.Index(fields=["run", "created_at"]),
        ]

    def __str__(self) -> str:
        return f"{self.step} ({self.level})"
