"""Prompt templates for the instruction parser, planner and decision reviewer.

The three instruction-parsing templates are reproduced word for word; only the
``{Instruction}`` and ``{Option1, Option2, ...}`` slots are substituted.
"""

from __future__ import annotations

from typing import Sequence

from ..actions import GRAMMAR_HELP, Plan, serialize
from ..world import Task

INSTRUCTION_SLOT = "{Instruction}"
OPTIONS_SLOT = "{Option1, Option2, ...}"

SIMPLE_PARSE_TEMPLATE = """\
Imagine that you are a very intelligent service robot.

You receive an instruction from the user: {Instruction}

You need to figure out what object the user needs, and then output it. Remember, answer in a short statement, because you can only choose one item.

Your output is:"""

ABSTRACT_PARSE_TEMPLATE = """\
Imagine that you are a very intelligent service robot.

You will receive an instruction from the user, and the only things you can provide to the user are listed as below {Option1, Option2, ...}.

The instruction you have just received is {Instruction}.

You need to choose the item you can provide that best fits the user's needs. Remember, answer in a short statement, because you can only choose one item."""

STEP_BY_STEP_PARSE_TEMPLATE = """\
Given an instruction, you need to extract the landmarks in the instruction and sort them in the order in which they appear in the realistic navigation (not in the order they appear in the instruction).

Requirement 1: Extract all landmarks in the instruction.

Requirement 2: Do not generate landmarks that are not in the instruction.

Requirement 3: Print the landmarks in sequence.

Requirement 4: Don't put anything other than a landmark on the landmark line.

For example:

Instruction: First, start at the Curtain, then walk along until you see the Plants, and continue heading straight. When you reach the Fridge, take a slight turn towards the right, and just a bit beyond it, you should see the Monitor.

Landmarks:
1. Curtain;
2. Plants;
3. Fridge;
4. Monitor.

Now, you are given an Instruction: {Instruction}

Landmarks:"""


def parse_prompt(task: Task, instruction: str, options: Sequence[str] = ()) -> str:
    if task is Task.SIMPLE:
        return SIMPLE_PARSE_TEMPLATE.replace(INSTRUCTION_SLOT, instruction)
    if task is Task.ABSTRACT:
        text = ABSTRACT_PARSE_TEMPLATE.replace(OPTIONS_SLOT, ", ".join(options))
        return text.replace(INSTRUCTION_SLOT, instruction)
    if task is Task.STEP_BY_STEP:
        return STEP_BY_STEP_PARSE_TEMPLATE.replace(INSTRUCTION_SLOT, instruction)
    raise ValueError(f"no parsing prompt for task {task}")


PLANNER_SYSTEM = f"""\
You are the planner of a household service robot navigating an indoor scene.
You observe the scene through four cameras (front, left, right, rear) and act
with global actions only.

{GRAMMAR_HELP}

Directions are relative to the robot's current heading. Use move_to_direction
when the target is not detected, choosing the most probable direction from
the tags you see. Use stop() only when the goal object is within reach."""

REVIEWER_SYSTEM = f"""\
You are the decision-making expert of a household service robot. You review
the planner's thought and proposed action and either keep it or replace it
with a more suitable one. Prefer approaching a detected object that may hold
or hide the target (shelf, table, counter, closet, fridge) over moving blindly
in a direction.

{GRAMMAR_HELP}"""

# task markers let a reader (or a test double) tell requests apart
TASK_INITIAL_PLAN = "TASK: initial_plan"
TASK_NEXT_ACTION = "TASK: next_action"
TASK_REPLAN = "TASK: replan"
TASK_REVIEW = "TASK: review"


def _context_block(
    instruction: str,
    goals: Sequence[str],
    landmarks: Sequence[str],
    scene_text: str,
    plan: Plan | None,
    executed: int,
    history_text: str,
    last_feedback: str | None,
) -> str:
    lines = [
        f"Instruction: {instruction}",
        f"Goal objects: [{', '.join(goals)}]",
        f"Landmarks: [{', '.join(landmarks)}]",
        "Scene description:",
        scene_text or "(nothing observed)",
    ]
    if plan is not None:
        done = [serialize(a) for a in plan.actions[:executed]]
        remaining = [serialize(a) for a in plan.actions[executed:]]
        lines.append("Executed plan actions: [" + ", ".join(done) + "]")
        lines.append("Remaining plan:")
        lines.extend(f"{i + 1}. {a}" for i, a in enumerate(remaining)) if remaining else lines.append("(empty)")
    lines.append("Trajectory history:")
    lines.append(history_text or "(none)")
    lines.append(f"Last feedback: {last_feedback or '(none)'}")
    return "\n".join(lines)


def initial_plan_prompt(instruction: str, goals, landmarks, scene_text: str) -> str:
    return "\n".join(
        [
            TASK_INITIAL_PLAN,
            _context_block(instruction, goals, landmarks, scene_text, None, 0, "", None),
            "",
            "Write the navigation plan as a numbered list with exactly one global action per line, ending with stop().",
        ]
    )


def next_action_prompt(instruction, goals, landmarks, scene_text, plan, executed, history_text, last_feedback) -> str:
    return "\n".join(
        [
            TASK_NEXT_ACTION,
            _context_block(instruction, goals, landmarks, scene_text, plan, executed, history_text, last_feedback),
            "",
            "Decide the next global action. Reply with two lines:",
            "Thought: <one sentence>",
            "Action: <exactly one global action>",
        ]
    )


def replan_prompt(instruction, goals, landmarks, scene_text, plan, executed, history_text, feedback_text) -> str:
    return "\n".join(
        [
            TASK_REPLAN,
            _context_block(instruction, goals, landmarks, scene_text, plan, executed, history_text, feedback_text),
            "",
            "The last action failed. Keep the executed actions and rewrite the remaining plan.",
            "Write only the new remaining actions as a numbered list, one global action per line.",
        ]
    )


def review_prompt(thought: str, action_text: str, scene_text: str) -> str:
    return "\n".join(
        [
            TASK_REVIEW,
            "Scene description:",
            scene_text or "(nothing observed)",
            f"Planner thought: {thought}",
            f"Proposed action: {action_text}",
            "",
            "Reply with two lines:",
            "Thought: <one sentence>",
            "Action: <exactly one global action, possibly unchanged>",
        ]
    )
