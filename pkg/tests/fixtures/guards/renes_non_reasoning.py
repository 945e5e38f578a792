from openai import OpenAI

client = OpenAI(timeout=30)

response = client.chat.completions.create(
    model="gpt-4o-2024-11-20",
    messages=[
        {"role": "system", "content": "You summarize release notes."},
        {"role": "user", "content": "Summarize the attached notes."},
    ],
    temperature=0.2,
    response_format={"type": "json_object"},
)
