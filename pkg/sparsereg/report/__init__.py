from sparsereg.report.report_data import MANIFEST_FILE, ReportTree
