# Generated by Django 5.2 on 2026-10-17 09:00

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='Run',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('kind', models.CharField(choices=[('simulate', 'Simulate'), ('fit', 'Fit'), ('benchmark', 'Benchmark'), ('diagnose', 'Diagnose')], max_length=10)),
                ('status', models.CharField(choices=[('queued', 'Queued'), ('running', 'Running'), ('completed', 'Completed'), ('failed', 'Failed'), ('unconverged', 'Unconverged')], default='queued', max_length=12)),
                ('output_dir', models.CharField(max_length=1024)),
                ('config', models.JSONField(blank=True, default=dict)),
                ('exit_code', models.IntegerField(blank=True, null=True)),
                ('message', models.TextField(blank=True)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('started_at', models.DateTimeField(blank=True, null=True)),
                ('completed_at', models.DateTimeField(blank=True, null=True)),
            ],
            options={
                'ordering': ['-created_at'],
                'indexes': [models.Index(fields=['kind'], name='smoother_ru_kind_6a0c1e_idx'), models.Index(fields=['status'], name='smoother_ru_status_8b1f2d_idx')],
            },
        ),
    ]
