from .client import (
    ChatClient,
    ChatTransportError,
    HTTPChatClient,
    MockChatClient,
    client_from_config,
    exchange,
    heuristic_reply,
    mock_panel,
)
from .core import (
    DEFENSE_CAP,
    Candidate,
    ConsensusSummary,
    DefenseArgument,
    DefenseUnavailable,
    DeliberationConfigError,
    DeliberationContext,
    DeliberationResult,
    DeliberationUnavailable,
    action_id,
    assign_defenders,
    consensus_prompt,
    defense_prompt,
    deliberate,
    parse_score_block,
    rl_prefilter,
    run_consensus,
    run_defense,
)
