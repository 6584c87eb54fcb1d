#!/usr/bin/env python3
"""Rebuild the 35-column IBM HR attrition CSV from the R `modeldata::attrition` table.

`modeldata` recodes the ordinal survey columns as labelled factors, replaces spaces
in level names with underscores, and drops four columns (EmployeeCount,
EmployeeNumber, Over18, StandardHours). This script reverses the recoding and
restores the public column layout. EmployeeNumber is not recoverable and is set
to the 1-based row index; the three dropped constant columns are restored with
their constant values.

usage: rebuild_ibm_csv.py attrition.pkl.compress out.csv
(the pickle ships inside the `rdatasets` wheel under _data/modeldata/)
"""
import sys

import pandas as pd

COLUMNS = [
    "Age", "Attrition", "BusinessTravel", "DailyRate", "Department",
    "DistanceFromHome", "Education", "EducationField", "EmployeeCount",
    "EmployeeNumber", "EnvironmentSatisfaction", "Gender", "HourlyRate",
    "JobInvolvement", "JobLevel", "JobRole", "JobSatisfaction", "MaritalStatus",
    "MonthlyIncome", "MonthlyRate", "NumCompaniesWorked", "Over18", "OverTime",
    "PercentSalaryHike", "PerformanceRating", "RelationshipSatisfaction",
    "StandardHours", "StockOptionLevel", "TotalWorkingYears",
    "TrainingTimesLastYear", "WorkLifeBalance", "YearsAtCompany",
    "YearsInCurrentRole", "YearsSinceLastPromotion", "YearsWithCurrManager",
]

ORDINALS = {
    "Education": ["Below_College", "College", "Bachelor", "Master", "Doctor"],
    "EnvironmentSatisfaction": ["Low", "Medium", "High", "Very_High"],
    "JobInvolvement": ["Low", "Medium", "High", "Very_High"],
    "JobSatisfaction": ["Low", "Medium", "High", "Very_High"],
    "RelationshipSatisfaction": ["Low", "Medium", "High", "Very_High"],
    "PerformanceRating": ["Low", "Good", "Excellent", "Outstanding"],
    "WorkLifeBalance": ["Bad", "Good", "Better", "Best"],
}

LEVEL_NAMES = {
    "Department": {"Research_Development": "Research & Development"},
}


def restore_level(column, value):
    if value in LEVEL_NAMES.get(column, {}):
        return LEVEL_NAMES[column][value]
    if column in ("Department", "EducationField", "JobRole"):
        return value.replace("_", " ")
    return value


def main():
    src, dst = sys.argv[1], sys.argv[2]
    df = pd.read_pickle(src, compression="xz")
    for column, levels in ORDINALS.items():
        df[column] = df[column].map(lambda v, lv=levels: lv.index(v) + 1)
    for column in ("Department", "EducationField", "JobRole"):
        df[column] = df[column].map(lambda v, c=column: restore_level(c, v))
    df["EmployeeNumber"] = df["rownames"].astype(int)
    df["EmployeeCount"] = 1
    df["Over18"] = "Y"
    df["StandardHours"] = 80
    df[COLUMNS].to_csv(dst, index=False, lineterminator="\n")


if __name__ == "__main__":
    main()
