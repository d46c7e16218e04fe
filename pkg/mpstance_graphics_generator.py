#!/usr/bin/env python3
"""
MPSTANCE - Générateur de Graphiques
Distributions de labels, métriques de la grille et confiance par niveau de désaccord
"""

import logging
import os
from typing import List, Optional

import matplotlib

matplotlib.use('Agg')

import matplotlib.pyplot as plt
import pandas as pd
import seaborn as sns

from mpstance_agreement import DisagreementLevel
from mpstance_experiment import ExperimentReport

logger = logging.getLogger(__name__)

plt.rcParams['figure.figsize'] = (12, 8)
plt.rcParams['font.size'] = 10
plt.rcParams['axes.grid'] = True
plt.rcParams['grid.alpha'] = 0.3

STANCE_COLORS = ['#0082C3', '#00A651', '#FF6900', '#E6007E', '#8B2635', '#FFD100']
sns.set_palette(STANCE_COLORS)

CHART_TITLES = {
    'label_distribution': '### 🏷️ Distribution des labels (originale / majoritaire)',
    'grid_metrics': '### 📈 Métriques de la grille',
    'confidence_by_level': '### 🤝 Confiance moyenne par niveau de désaccord',
}


class MpstanceGraphicsGenerator:
    """Générateur de graphiques pour les statistiques de corpus et les expériences."""

    def __init__(self, output_dir: str = "mpstance_charts"):
        self.output_dir = output_dir
        os.makedirs(output_dir, exist_ok=True)

    def _save(self, fig, filename: str) -> str:
        fig.tight_layout()
        fig.savefig(os.path.join(self.output_dir, filename), dpi=150, bbox_inches='tight')
        plt.close(fig)
        return filename

    def create_label_distribution_chart(self, distributions: pd.DataFrame, name: str = 'corpus') -> str:
        """Deux panneaux: labels par annotation et labels majoritaires par document."""
        try:
            if distributions.empty:
                return ""

            fig, axes = plt.subplots(1, 2, figsize=(14, 6))
            panels = [('original', 'Original label distribution'), ('majority', 'Majority label distribution')]
            for ax, (column, title) in zip(axes, panels):
                data = distributions[distributions[column] > 0]
                sns.barplot(data=data, x='label', y=column, ax=ax, color=STANCE_COLORS[0])
                ax.set_title(title, fontsize=13, fontweight='bold')
                ax.set_xlabel('')
                ax.set_ylabel('Nombre')
                for container in ax.containers:
                    ax.bar_label(container, fmt='%d', fontweight='bold')

            return self._save(fig, f"label_distribution_{name}.png")

        except Exception as e:
            logger.error(f"❌ Erreur création graphique distribution des labels: {e}")
            return ""

    def create_grid_metrics_chart(self, report: ExperimentReport) -> str:
        """Barres groupées Acc. / Prec. / Rec. / F1 par cellule de la grille."""
        try:
            rows = []
            for cell in report.ordered_cells():
                name = f"{cell.approach.value}\nchunking {'yes' if cell.chunking else 'no'}"
                for metric in ('accuracy', 'precision', 'recall', 'f1'):
                    rows.append({'cell': name, 'metric': metric, 'value': getattr(cell.result, metric)})
            if not rows:
                return ""

            fig, ax = plt.subplots(figsize=(12, 7))
            sns.barplot(data=pd.DataFrame(rows), x='cell', y='value', hue='metric', ax=ax)
            ax.set_ylim(0, 100)
            ax.set_ylabel('Points de pourcentage')
            ax.set_xlabel('')
            ax.set_title('Baseline vs Multi-Perspective', fontsize=14, fontweight='bold')
            return self._save(fig, "grid_metrics.png")

        except Exception as e:
            logger.error(f"❌ Erreur création graphique des métriques: {e}")
            return ""

    def create_confidence_by_level_chart(self, report: ExperimentReport) -> str:
        try:
            rows = []
            for cell in report.ordered_cells():
                name = f"{cell.approach.value} / {'yes' if cell.chunking else 'no'}"
                for level in DisagreementLevel:
                    summary = cell.result.per_level.get(level.value)
                    if summary is not None:
                        rows.append({'cell': name, 'level': level.value, 'confidence': summary.avg_confidence})
            if not rows:
                return ""

            fig, ax = plt.subplots(figsize=(12, 7))
            sns.barplot(data=pd.DataFrame(rows), x='level', y='confidence', hue='cell', ax=ax)
            ax.set_ylim(0, 1)
            ax.set_ylabel('Confiance moyenne')
            ax.set_xlabel('Niveau de désaccord des annotateurs')
            ax.set_title('Confiance du modèle selon le désaccord', fontsize=14, fontweight='bold')
            return self._save(fig, "confidence_by_level.png")

        except Exception as e:
            logger.error(f"❌ Erreur création graphique confiance par niveau: {e}")
            return ""

    def create_experiment_dashboard(self, report: ExperimentReport,
                                    distributions: Optional[pd.DataFrame] = None) -> List[str]:
        logger.info("📊 Génération des graphiques de l'expérience")

        generated_charts = []
        if distributions is not None:
            generated_charts.append(self.create_label_distribution_chart(distributions))
        generated_charts.append(self.create_grid_metrics_chart(report))
        generated_charts.append(self.create_confidence_by_level_chart(report))
        generated_charts = [chart for chart in generated_charts if chart]

        logger.info(f"✅ {len(generated_charts)} graphiques générés dans {self.output_dir}")
        return generated_charts

    def generate_chart_markdown_integration(self, chart_filenames: List[str]) -> str:
        """Code Markdown d'intégration des graphiques."""
        if not chart_filenames:
            return ""

        relative_dir = os.path.basename(os.path.normpath(self.output_dir))
        markdown_content = "\n---\n\n## 📊 VISUALISATIONS\n\n"
        for chart_file in chart_filenames:
            chart_type = next((key for key in CHART_TITLES if chart_file.startswith(key)), None)
            if chart_type:
                title = CHART_TITLES[chart_type]
                alt = title.replace('#', '').strip()
                markdown_content += f"{title}\n\n![{alt}](./{relative_dir}/{chart_file})\n\n"
        return markdown_content
