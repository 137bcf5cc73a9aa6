"""Prompt templates for extraction and answer generation.

Templates are plain ``str.format`` strings. The rule-based mock LLM keys off
the section headers, so keep them stable (golden files in tests/golden pin
the full renderings).
"""

from __future__ import annotations

M1_HEADER = "## Task: subject-centric interaction extraction"
M2_HEADER = "## Task: pair interaction extraction"
RAG_HEADER = "## Task: temporal news question answering"
RAG_EMPTY_HEADER = "## Task: temporal news question answering (no supporting passages)"

M1_TEMPLATE = """\
{header}
You are given a news excerpt in which named entities are marked with <e> and </e>. \
Extract the interactions (events or activities) between the subject entity and the other marked entities.

Subject entity: {subject}
Publication date: {date}

## News excerpt
{text}

## Output format
Return one interaction per line as (YYYYMMDD, sentence), where YYYYMMDD is the publication date \
and the sentence is a single self-contained sentence naming the subject entity and the other entity involved.
Use only information stated in the excerpt. Do not number the lines.
If the excerpt describes no interaction involving the subject entity, return NONE.
"""

M2_TEMPLATE = """\
{header}
You are given dated news excerpts in which named entities are marked with <e> and </e>. \
Extract the interactions (events or activities) between the subject entity and the object entity.

Subject entity: {subject}
Object entity: {object}

## News excerpts
{passages}

## Output format
Return one interaction per line as (YYYYMMDD, sentence), where YYYYMMDD is the date of the excerpt \
the interaction comes from and the sentence is a single self-contained sentence naming both entities.
Use only information stated in the excerpts. Do not number the lines.
If no interaction between the two entities is confidently detected, return an empty list: NONE
"""

RAG_TEMPLATE = """\
{header}
Answer the user query using only the supporting passages below. Each passage is prefixed with its date.
Focus on what happened on or around the query date, mention the relevant date(s) in the answer, \
and do not add facts that the passages do not support.

## Query
{query}

## Supporting passages
{passages}

## Answer
"""

RAG_EMPTY_TEMPLATE = """\
{header}
No supporting passages were found for the user query below. Reply that up-to-date information \
about this query is not available for the given date, without guessing.

## Query
{query}

## Answer
"""
