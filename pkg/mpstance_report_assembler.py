#!/usr/bin/env python3
"""
MPSTANCE - Assembleur de rapport
Rapport Markdown de l'expérience (et rendu HTML optionnel)
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Union

import markdown

from mpstance_agreement import AgreementReport, DisagreementLevel
from mpstance_experiment import ExperimentReport

logger = logging.getLogger(__name__)

HTML_TEMPLATE = """<!DOCTYPE html>
<html lang="fr">
<head>
<meta charset="utf-8">
<title>{title}</title>
<style>
body {{ font-family: sans-serif; max-width: 980px; margin: 2em auto; color: #222; }}
table {{ border-collapse: collapse; margin: 1em 0; }}
th, td {{ border: 1px solid #ccc; padding: 4px 10px; text-align: right; }}
th {{ background: #0082C3; color: white; }}
td:first-child, th:first-child {{ text-align: left; }}
img {{ max-width: 100%; }}
</style>
</head>
<body>
{body}
</body>
</html>
"""


def _markdown_table(headers: List[str], rows: List[List[str]]) -> str:
    lines = ['| ' + ' | '.join(headers) + ' |', '|' + '|'.join(['---'] * len(headers)) + '|']
    lines += ['| ' + ' | '.join(row) + ' |' for row in rows]
    return '\n'.join(lines)


class MpstanceReportAssembler:
    """Assemble le rapport complet d'une expérience."""

    def create_summary(self, report: ExperimentReport) -> str:
        sizes = report.split_sizes
        best = max(report.ordered_cells(), key=lambda cell: cell.result.f1)
        discarded = len(report.test_ties.get('discarded', []))
        return f"""# RAPPORT D'EXPÉRIENCE - CLASSIFICATION DE POSITION MULTI-PERSPECTIVE

### 📊 **Données**
- **Découpage** : {sizes.get('train', 0)} train / {sizes.get('val', 0)} validation / {sizes.get('test', 0)} test
- **Documents de test évalués** : {sizes.get('test_evaluated', 0)} ({discarded} écartés pour égalité de vote)
- **Meilleure cellule (F1)** : {best.approach.value}, chunking {'yes' if best.chunking else 'no'} ({best.result.f1:.2f})
"""

    def create_results_section(self, report: ExperimentReport) -> str:
        rows = [
            [cell.approach.value, cell.model_name, 'yes' if cell.chunking else 'no',
             f"{cell.result.accuracy:.2f}", f"{cell.result.precision:.2f}", f"{cell.result.recall:.2f}",
             f"{cell.result.f1:.2f}", f"{cell.result.avg_confidence:.2f}"]
            for cell in report.ordered_cells()
        ]
        table = _markdown_table(
            ['Approach', 'Model', 'Chunking', 'Acc.', 'Prec.', 'Rec.', 'F1', 'Avg. Conf.'], rows
        )
        validation = _markdown_table(
            ['Approach', 'Chunking', 'Instances train', 'Instances val', 'Loss val finale'],
            [[cell.approach.value, 'yes' if cell.chunking else 'no', str(cell.n_train_instances),
              str(cell.n_val_instances),
              f"{cell.final_val_loss:.4f}" if cell.final_val_loss is not None else 'N/A']
             for cell in report.ordered_cells()],
        )
        return f"## 🎯 RÉSULTATS\n\n{table}\n\n### Validation\n\n{validation}\n"

    def create_disagreement_section(self, report: ExperimentReport) -> str:
        levels = [level.value for level in DisagreementLevel]
        rows = []
        for cell in report.ordered_cells():
            row = [f"{cell.approach.value} / {'yes' if cell.chunking else 'no'}"]
            for level in levels:
                summary = cell.result.per_level.get(level)
                row.append(f"{summary.avg_confidence:.3f} (n={summary.n_docs})" if summary else '-')
            rows.append(row)
        return "## 🤝 CONFIANCE PAR NIVEAU DE DÉSACCORD\n\n" + _markdown_table(['Cellule'] + levels, rows) + '\n'

    def create_per_query_section(self, report: ExperimentReport) -> str:
        cells = report.ordered_cells()
        queries = sorted({query for cell in cells for query in cell.result.per_query})
        if not queries:
            return ""
        headers = ['Requête'] + [f"{c.approach.value} / {'yes' if c.chunking else 'no'}" for c in cells]
        rows = []
        for query in queries:
            row = [query]
            for cell in cells:
                summary = cell.result.per_query.get(query)
                row.append(f"{summary.accuracy:.1f}% (n={summary.n_docs})" if summary else '-')
            rows.append(row)
        return "## 🔎 EXACTITUDE PAR REQUÊTE\n\n" + _markdown_table(headers, rows) + '\n'

    def create_agreement_section(self, agreement: AgreementReport) -> str:
        return f"""## 🧮 ACCORD INTER-ANNOTATEURS

- **Fleiss kappa** : {agreement.fleiss_kappa:.4f}
- **Accord par paires** : {agreement.pairwise_agreement:.4f}
- **Items** : {agreement.n_items} ({agreement.n_raters} annotateurs par item, {agreement.excluded_items} exclus)

{agreement.agreement_definition}
"""

    def create_configuration_section(self, report: ExperimentReport) -> str:
        payload = json.dumps(report.run_config, sort_keys=True, indent=2, ensure_ascii=False)
        fingerprints = '\n'.join(f"- **{name}** : `{value}`" for name, value in sorted(report.fingerprints.items()))
        return f"## ⚙️ CONFIGURATION\n\n{fingerprints}\n\n```json\n{payload}\n```\n"

    def assemble_report(self, report: ExperimentReport, agreement: Optional[AgreementReport] = None,
                        chart_integration: str = "") -> str:
        logger.info("🔧 Assemblage du rapport d'expérience")

        sections = [
            self.create_summary(report),
            self.create_results_section(report),
            self.create_disagreement_section(report),
            self.create_per_query_section(report),
        ]
        if agreement is not None:
            sections.append(self.create_agreement_section(agreement))
        if chart_integration:
            sections.append(chart_integration)
        sections.append(self.create_configuration_section(report))

        content = '\n\n---\n\n'.join(section.strip('\n') for section in sections if section) + '\n'
        logger.info(f"✅ Rapport assemblé: {len(content):,} caractères")
        return content

    def convert_markdown_to_html(self, text: str, title: str = "Rapport MPSTANCE") -> str:
        """Convertit le Markdown en HTML en utilisant la librairie markdown."""
        md = markdown.Markdown(
            extensions=[
                'markdown.extensions.tables',
                'markdown.extensions.fenced_code',
                'markdown.extensions.sane_lists',
            ]
        )
        return HTML_TEMPLATE.format(title=title, body=md.convert(text))

    def save_report(self, content: str, path: Union[str, Path], html: bool = False) -> Dict[str, Path]:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(content, encoding='utf-8')
        written = {'markdown': path}
        logger.info(f"💾 Rapport Markdown écrit dans {path}")

        if html:
            html_path = path.with_suffix('.html')
            html_path.write_text(self.convert_markdown_to_html(content), encoding='utf-8')
            written['html'] = html_path
            logger.info(f"💾 Rapport HTML écrit dans {html_path}")
        return written
