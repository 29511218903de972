from django.db import models
from django.utils import timezone


class Run(models.Model):
    KIND_CHOICES = [
        ('simulate', 'Simulate'),
        ('fit', 'Fit'),
        ('benchmark', 'Benchmark'),
        ('diagnose', 'Diagnose'),
    ]
    STATUS_CHOICES = [
        ('queued', 'Queued'),
        ('running', 'Running'),
        ('completed', 'Completed'),
        ('failed', 'Failed'),
        ('unconverged', 'Unconverged'),
    ]

    kind = models.CharField(max_length=10, choices=KIND_CHOICES)
    status = models.CharField(max_length=12, choices=STATUS_CHOICES, default='queued')
    output_dir = models.CharField(max_length=1024)
    config = models.JSONField(default=dict, blank=True)
    exit_code = models.IntegerField(null=True, blank=True)
    message = models.TextField(blank=True)
    created_at = models.DateTimeField(auto_now_add=True)
    started_at = models.DateTimeField(null=True, blank=True)
    completed_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        ordering = ['-created_at']
        indexes = [
            models.Index(fields=['kind'], name='smoother_ru_kind_6a0c1e_idx'),
            models.Index(fields=['status'], name='smoother_ru_status_8b1f2d_idx'),
        ]

    def __str__(self):
        return f"{self.kind} run -> {self.output_dir} ({self.status})"

    def start(self):
        self.status = 'running'
        self.started_at = timezone.now()
        self.save(update_fields=['status', 'started_at'])

    def finish(self, status, exit_code=0, message=''):
        self.status = status
        self.exit_code = exit_code
        self.message = message
        self.completed_at = timezone.now()
        self.save(update_fields=['status', 'exit_code', 'message', 'completed_at'])

    @property
    def duration(self):
        if self.started_at and self.completed_at:
            return (self.completed_at - self.started_at).total_seconds()
        return None
