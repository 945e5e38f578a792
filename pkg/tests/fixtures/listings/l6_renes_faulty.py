client = OpenAI()
response = client.responses.create(
    model="gpt-5.1-mini-2025-02-01",
    input=[
        {
            "role": "system",
            "content": "You are a careful assistant that explains your reasoning for complex software engineering decisions."
        },
        {
            "role": "user",
            "content": (
                "We plan to integrate a large language model into a safety critical pipeline for code review. Explain the main tradeoffs, risks, and mitigations in a structured way."
            ),
        },
    ],
    temperature=0.2 )
